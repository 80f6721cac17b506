"""Per-utterance feature cache files.

Layout: 8-byte magic "EMOVC001", a uint32 little-endian byte length, a
UTF-8 JSON header (speaker, emotion, session, frame_period_ms,
sample_rate, fft_size, alpha, array shapes, dtype), then raw
little-endian float64 blocks for f0, mcep and ap in that order. The
round trip is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .mcep import McepSeq

MAGIC = b"EMOVC001"
DTYPE_TAG = "f64le"
_F64 = np.dtype("<f8")


@dataclass
class FeatureRecord:
    """Cached analysis results for one utterance."""

    speaker: str
    emotion: str
    session: str
    f0: np.ndarray              # (T,)
    mcep: np.ndarray            # (order, T)
    ap: np.ndarray              # (T, K)
    frame_period_ms: float
    sample_rate: int
    fft_size: int
    alpha: float

    def __post_init__(self):
        self.f0 = np.ascontiguousarray(self.f0, dtype=np.float64)
        self.mcep = np.ascontiguousarray(self.mcep, dtype=np.float64)
        self.ap = np.ascontiguousarray(self.ap, dtype=np.float64)
        t = self.f0.shape[0]
        if self.mcep.shape[1] != t or self.ap.shape[0] != t:
            raise InvalidInputError(
                f"inconsistent frame counts: f0 {t}, mcep {self.mcep.shape[1]},"
                f" ap {self.ap.shape[0]}"
            )

    @property
    def n_frames(self) -> int:
        return self.f0.shape[0]

    def mcep_seq(self) -> McepSeq:
        return McepSeq(self.mcep, alpha=self.alpha, fft_size=self.fft_size)


def write_features(path, rec: FeatureRecord) -> None:
    header = {
        "speaker": rec.speaker,
        "emotion": rec.emotion,
        "session": rec.session,
        "frame_period_ms": rec.frame_period_ms,
        "sample_rate": rec.sample_rate,
        "fft_size": rec.fft_size,
        "alpha": rec.alpha,
        "shapes": {
            "f0": list(rec.f0.shape),
            "mcep": list(rec.mcep.shape),
            "ap": list(rec.ap.shape),
        },
        "dtype": DTYPE_TAG,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in (rec.f0, rec.mcep, rec.ap):
            fh.write(np.ascontiguousarray(arr, dtype=_F64).tobytes())


def read_features(path) -> FeatureRecord:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise InvalidInputError(f"{path}: not a feature cache file (bad magic {magic!r})")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("dtype") != DTYPE_TAG:
            raise InvalidInputError(f"{path}: unsupported dtype {header.get('dtype')!r}")
        arrays = {}
        for name in ("f0", "mcep", "ap"):
            shape = tuple(header["shapes"][name])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise InvalidInputError(f"{path}: truncated block {name!r}")
            arrays[name] = np.frombuffer(buf, dtype=_F64).reshape(shape).copy()
    return FeatureRecord(
        speaker=header["speaker"],
        emotion=header["emotion"],
        session=header["session"],
        f0=arrays["f0"],
        mcep=arrays["mcep"],
        ap=arrays["ap"],
        frame_period_ms=float(header["frame_period_ms"]),
        sample_rate=int(header["sample_rate"]),
        fft_size=int(header["fft_size"]),
        alpha=float(header["alpha"]),
    )


def cache_path(features_dir, audio_path) -> Path:
    """Stable cache location for an utterance, unique per audio path."""
    audio_path = str(audio_path)
    digest = hashlib.sha1(audio_path.encode("utf-8")).hexdigest()[:10]
    stem = Path(audio_path).stem or "utt"
    return Path(features_dir) / f"{stem}__{digest}.evc"
