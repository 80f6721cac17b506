"""Waveform container, WAV file I/O and resampling.

All processing in this package runs at 16 kHz mono. Files at other rates
are resampled on read; writing always produces 16-bit PCM at 16 kHz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import InvalidInputError

TARGET_SAMPLE_RATE = 16000


@dataclass
class Waveform:
    """Mono audio signal with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = TARGET_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InvalidInputError(f"waveform must be mono 1-D, got shape {self.samples.shape}")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise InvalidInputError("waveform contains NaN or Inf samples")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def resample(w: Waveform, sample_rate: int) -> Waveform:
    """Polyphase resampling to `sample_rate`; identity if already there."""
    if w.sample_rate == sample_rate:
        return w
    g = math.gcd(w.sample_rate, sample_rate)
    out = resample_poly(w.samples, sample_rate // g, w.sample_rate // g)
    return Waveform(out, sample_rate)


def read_wav(path) -> Waveform:
    """Read a WAV file as mono float in [-1, 1] at 16 kHz.

    Integer PCM is scaled by its full-scale value; multi-channel audio is
    averaged down to mono; any sample rate is accepted and resampled.
    """
    rate, data = wavfile.read(path)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        data = data / 32768.0
    elif data.dtype == np.int32:
        data = data / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    else:
        data = data.astype(np.float64)
    w = Waveform(data, rate)
    return resample(w, TARGET_SAMPLE_RATE)


def write_wav(path, w: Waveform) -> None:
    """Write 16-bit PCM; samples are clipped to [-1, 1] first."""
    clipped = np.clip(w.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype(np.int16)
    wavfile.write(path, w.sample_rate, pcm)
