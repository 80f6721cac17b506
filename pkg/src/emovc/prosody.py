"""Per-domain log-F0 statistics and the moment-matching F0 conversion.

Voiced F0 values are mapped through an affine transform in the log
domain so that the source domain's mean/std of ln(F0) are transported
onto the target domain's. Unvoiced frames (F0 = 0) pass through
unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDomainError, InvalidInputError

SIGMA_FLOOR = 1e-5


@dataclass
class LogF0Stats:
    """Mean and standard deviation of ln(F0) over voiced frames."""

    mu: float
    sigma: float
    n_frames: int
    speaker: str = ""
    emotion: str = ""

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise InvalidInputError("log-F0 mean is not finite")
        if self.n_frames < 1:
            raise InvalidInputError("stats need at least one voiced frame")
        self.sigma = float(max(self.sigma, SIGMA_FLOOR))


def estimate_logf0_stats(f0_tracks, speaker: str = "", emotion: str = "") -> LogF0Stats:
    """Population moments of ln(F0) pooled over all voiced frames.

    `f0_tracks` is any iterable of per-frame F0 arrays; zeros (unvoiced)
    are excluded. Raises EmptyDomainError if no voiced frame exists.
    """
    voiced = []
    for track in f0_tracks:
        track = np.asarray(track, dtype=np.float64)
        if np.any(track < 0):
            raise InvalidInputError("negative F0 in track")
        voiced.append(track[track > 0])
    if not voiced:
        raise EmptyDomainError("no F0 tracks given")
    pooled = np.concatenate(voiced)
    if pooled.size == 0:
        raise EmptyDomainError("no voiced frames in any track")
    logs = np.log(pooled)
    return LogF0Stats(
        mu=float(logs.mean()),
        sigma=float(logs.std()),
        n_frames=int(pooled.size),
        speaker=speaker,
        emotion=emotion,
    )


def convert_f0(f0: np.ndarray, src: LogF0Stats, tgt: LogF0Stats) -> np.ndarray:
    """Map voiced frames by exp((ln f - mu_src) * sigma_tgt/sigma_src + mu_tgt)."""
    f0 = np.asarray(f0, dtype=np.float64)
    if np.any(f0 < 0):
        raise InvalidInputError("negative F0 input")
    out = np.zeros_like(f0)
    voiced = f0 > 0
    out[voiced] = np.exp(
        (np.log(f0[voiced]) - src.mu) * (tgt.sigma / src.sigma) + tgt.mu
    )
    return out


def save_logf0_stats(stats: LogF0Stats, path) -> None:
    doc = {
        "speaker": stats.speaker,
        "emotion": stats.emotion,
        "mu": stats.mu,
        "sigma": stats.sigma,
        "n_frames": stats.n_frames,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_logf0_stats(path) -> LogF0Stats:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return LogF0Stats(
        mu=float(doc["mu"]),
        sigma=float(doc["sigma"]),
        n_frames=int(doc["n_frames"]),
        speaker=doc.get("speaker", ""),
        emotion=doc.get("emotion", ""),
    )
