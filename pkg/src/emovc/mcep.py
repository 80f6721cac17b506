"""Mel-cepstral coding of spectral envelopes, feature statistics and VAD.

The envelope coder represents the log amplitude spectrum on a warped
frequency axis (all-pass bilinear transform with warping coefficient
alpha; 0.42 is the usual choice at 16 kHz) and truncates to a small
number of coefficients. Coefficient 0 carries the log energy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyDomainError, InvalidInputError, ShapeError
from .vocoder import FFT_SIZE, VocoderFrames

DEFAULT_ALPHA = 0.42
DEFAULT_ORDER = 24
STD_FLOOR = 1e-5
VAD_THRESHOLD_DB = 30.0


@dataclass
class McepSeq:
    """Mel-cepstral coefficient matrix, one column per frame."""

    coeffs: np.ndarray          # (order, T)
    alpha: float = DEFAULT_ALPHA
    fft_size: int = FFT_SIZE

    def __post_init__(self):
        self.coeffs = np.ascontiguousarray(self.coeffs, dtype=np.float64)
        if self.coeffs.ndim != 2:
            raise ShapeError(f"mcep matrix must be 2-D, got shape {self.coeffs.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise InvalidInputError("mcep matrix contains non-finite values")

    @property
    def order(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[1]


@dataclass
class McepStats:
    """Per-coefficient mean and standard deviation for z-scoring."""

    mean: np.ndarray            # (order,)
    std: np.ndarray             # (order,), floored to STD_FLOOR

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ShapeError("stats mean/std must be 1-D vectors of equal length")
        if np.any(self.std <= 0):
            raise InvalidInputError("stats std must be strictly positive")


def mcep_stats(seqs) -> McepStats:
    """Pooled per-coefficient moments over a collection of McepSeq."""
    seqs = list(seqs)
    if not seqs:
        raise EmptyDomainError("no sequences to compute statistics from")
    pooled = np.concatenate([s.coeffs for s in seqs], axis=1)
    mean = pooled.mean(axis=1)
    std = np.maximum(pooled.std(axis=1), STD_FLOOR)
    return McepStats(mean, std)


def _freqt(c: np.ndarray, n_out: int, alpha: float) -> np.ndarray:
    """Warp one-sided cepstra (coefficients along axis 0) by alpha.

    Standard frequency-transform recursion; exact for n_out -> inf,
    truncation beyond n_out coefficients is the coding loss.
    """
    n_in = c.shape[0]
    out = np.zeros((n_out,) + c.shape[1:])
    prev = np.zeros_like(out)
    one_minus_a2 = 1.0 - alpha * alpha
    for i in range(n_in - 1, -1, -1):
        out, prev = prev, out
        out[0] = c[i] + alpha * prev[0]
        if n_out > 1:
            out[1] = one_minus_a2 * prev[0] + alpha * prev[1]
        for m in range(2, n_out):
            out[m] = prev[m - 1] + alpha * (prev[m] - out[m - 1])
    return out


def sp_to_mcep(sp: np.ndarray, order: int = DEFAULT_ORDER,
               alpha: float = DEFAULT_ALPHA) -> McepSeq:
    """Code a (T, K) power envelope into `order` mel-cepstral rows.

    `order` counts the rows of the result including the energy
    coefficient c0, matching the decoder's output width.
    """
    sp = np.asarray(sp, dtype=np.float64)
    if sp.ndim != 2:
        raise ShapeError(f"envelope must be (T, K), got shape {sp.shape}")
    if not np.all(np.isfinite(sp)) or np.any(sp <= 0):
        raise InvalidInputError("envelope must be finite and strictly positive")
    n_bins = sp.shape[1]
    fft_size = 2 * (n_bins - 1)

    log_amp = 0.5 * np.log(sp)
    cep = np.fft.irfft(log_amp, fft_size, axis=1)
    folded = cep[:, : n_bins].copy()
    folded[:, 1:-1] *= 2.0
    mc = _freqt(folded.T, order, alpha)
    return McepSeq(mc, alpha=alpha, fft_size=fft_size)


def mcep_to_sp(m: McepSeq) -> np.ndarray:
    """Invert sp_to_mcep up to truncation loss; output is (T, K) > 0."""
    n_bins = m.fft_size // 2 + 1
    if not 1 <= m.order <= n_bins:
        raise ShapeError(
            f"{m.order} coefficient rows cannot decode against fft_size {m.fft_size}"
        )
    folded = _freqt(m.coeffs, n_bins, -m.alpha)
    sym = np.zeros((m.n_frames, m.fft_size))
    sym[:, 0] = folded[0]
    sym[:, 1:n_bins - 1] = folded[1:-1].T / 2.0
    sym[:, n_bins - 1] = folded[-1]
    sym[:, n_bins:] = sym[:, 1:n_bins - 1][:, ::-1]
    log_amp = np.fft.rfft(sym, m.fft_size, axis=1).real
    return np.exp(2.0 * log_amp)


def log_spectral_distortion_db(sp_a: np.ndarray, sp_b: np.ndarray) -> float:
    """RMS difference of the two log power envelopes, in dB."""
    d = 10.0 * (np.log10(sp_a) - np.log10(sp_b))
    return float(np.sqrt(np.mean(d ** 2)))


def frame_energy_db(v: VocoderFrames) -> np.ndarray:
    """Per-frame energy (dB) from the envelope rows."""
    return 10.0 * np.log10(np.sum(v.sp, axis=1) + 1e-300)


def energy_vad(m: McepSeq, v: VocoderFrames,
               threshold_db: float = VAD_THRESHOLD_DB):
    """Drop frames more than `threshold_db` below the loudest frame.

    The same frames are removed from the coefficient matrix and the
    vocoder frames, preserving order. Raises EmptyDomainError when
    nothing survives.
    """
    if m.n_frames != v.n_frames:
        raise ShapeError(
            f"mcep has {m.n_frames} frames but vocoder features have {v.n_frames}"
        )
    energy = frame_energy_db(v)
    keep = energy >= energy.max() - threshold_db
    if not np.any(keep):
        raise EmptyDomainError(
            f"VAD removed all {m.n_frames} frames"
            f" (max energy {energy.max():.1f} dB, threshold {threshold_db} dB)"
        )
    trimmed = VocoderFrames(
        v.f0[keep], v.sp[keep], v.ap[keep],
        frame_period_ms=v.frame_period_ms,
        sample_rate=v.sample_rate, fft_size=v.fft_size,
    )
    return replace(m, coeffs=m.coeffs[:, keep]), trimmed


def normalize(m: McepSeq, s: McepStats) -> McepSeq:
    """Per-coefficient z-scoring."""
    if s.mean.shape[0] != m.order:
        raise ShapeError(f"stats cover {s.mean.shape[0]} coefficients, data has {m.order}")
    return replace(m, coeffs=(m.coeffs - s.mean[:, None]) / s.std[:, None])


def denormalize(m: McepSeq, s: McepStats) -> McepSeq:
    """Exact inverse of normalize."""
    if s.mean.shape[0] != m.order:
        raise ShapeError(f"stats cover {s.mean.shape[0]} coefficients, data has {m.order}")
    return replace(m, coeffs=m.coeffs * s.std[:, None] + s.mean[:, None])


def save_mcep_stats(stats: McepStats, path, speaker: str = "") -> None:
    doc = {"speaker": speaker, "mean": stats.mean.tolist(), "std": stats.std.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_mcep_stats(path) -> McepStats:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return McepStats(np.asarray(doc["mean"]), np.asarray(doc["std"]))
