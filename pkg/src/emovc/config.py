"""Flat key=value training-run configuration files.

Blank lines and lines starting with '#' are ignored. Unknown keys are
rejected with the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParseError


@dataclass
class TrainRunConfig:
    speaker: str
    emotion_1: str
    emotion_2: str
    features_dir: str
    stats_dir: str
    out_dir: str
    batch_size: int = 8
    total_iters: int = 200_000
    decay_start: int = 150_000
    ratio_switch_iter: int = 100_000
    lambda_s: float = 1.0
    lambda_c: float = 1.0
    lambda_x: float = 10.0
    lambda_g: float = 1.0
    lr_g: float = 2e-4
    lr_d: float = 1e-4
    seed: int = 0
    # optional extension: shrink network widths for desk-scale runs
    model_width_divisor: int = 1


_REQUIRED = ("speaker", "emotion_1", "emotion_2", "features_dir", "stats_dir", "out_dir")
_FIELD_TYPES = {f.name: f.type for f in fields(TrainRunConfig)}


def parse_train_config(path) -> TrainRunConfig:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"config file not found: {path}")
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", line=lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _FIELD_TYPES:
                raise ParseError(f"unknown key {key!r}", line=lineno)
            if key in values:
                raise ParseError(f"duplicate key {key!r}", line=lineno)
            kind = _FIELD_TYPES[key]
            try:
                if kind == "int" or kind is int:
                    values[key] = int(value)
                elif kind == "float" or kind is float:
                    values[key] = float(value)
                else:
                    values[key] = value
            except ValueError:
                raise ParseError(f"bad value for {key!r}: {value!r}", line=lineno) from None
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ParseError(f"missing required keys: {', '.join(missing)}")
    return TrainRunConfig(**values)


def write_train_config(cfg: TrainRunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(TrainRunConfig):
            fh.write(f"{f.name}={getattr(cfg, f.name)}\n")
