"""Deterministic synthetic speech-like signals.

Used by the demos, the test-suite oracles and the desk-scale smoke
training corpus (vowel-like harmonic tones whose spectral tilt stands in
for an emotion-specific timbre).
"""

from __future__ import annotations

import numpy as np

from .audio import TARGET_SAMPLE_RATE, Waveform


def _resonance_gain(freq: np.ndarray, center: float, bandwidth: float) -> np.ndarray:
    # magnitude response of a two-pole resonator, peak normalized to 1
    return 1.0 / np.sqrt(1.0 + ((freq - center) / bandwidth) ** 2)


def harmonic_vowel(
    f0: float = 150.0,
    duration: float = 1.0,
    sample_rate: int = TARGET_SAMPLE_RATE,
    formants=((730.0, 90.0), (1090.0, 110.0), (2440.0, 160.0)),
    tilt_db_per_octave: float = -6.0,
    vibrato_cents: float = 0.0,
    amplitude: float = 0.3,
) -> Waveform:
    """Sum-of-harmonics vowel with formant peaks and a spectral tilt.

    The pitch is exactly `f0` (optionally with slow vibrato), which makes
    the signal a ground-truth oracle for F0 estimation.
    """
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    if vibrato_cents > 0.0:
        # 5 Hz vibrato, +-vibrato_cents around f0
        inst_f0 = f0 * 2.0 ** (vibrato_cents / 1200.0 * np.sin(2 * np.pi * 5.0 * t))
    else:
        inst_f0 = np.full(n, f0)
    phase = 2 * np.pi * np.cumsum(inst_f0) / sample_rate

    sig = np.zeros(n)
    k_max = int((0.45 * sample_rate) // f0)
    for k in range(1, k_max + 1):
        freq = k * f0
        gain = sum(_resonance_gain(np.array(freq), c, b) for c, b in formants)
        gain *= 2.0 ** (tilt_db_per_octave / 6.0206 * np.log2(freq / f0))
        sig += float(gain) * np.sin(k * phase)

    # short raised-cosine fade to avoid clicks at the edges
    fade = min(int(0.01 * sample_rate), n // 4)
    env = np.ones(n)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
    env[:fade] = ramp
    env[n - fade:] = ramp[::-1]
    sig *= env

    sig *= amplitude / np.max(np.abs(sig))
    return Waveform(sig, sample_rate)


def silence(duration: float = 1.0, sample_rate: int = TARGET_SAMPLE_RATE) -> Waveform:
    return Waveform(np.zeros(int(round(duration * sample_rate))), sample_rate)


def white_noise(
    duration: float = 1.0,
    sample_rate: int = TARGET_SAMPLE_RATE,
    amplitude: float = 0.1,
    seed: int = 0,
) -> Waveform:
    rng = np.random.default_rng(seed)
    sig = amplitude * rng.standard_normal(int(round(duration * sample_rate)))
    return Waveform(np.clip(sig, -1.0, 1.0), sample_rate)


def speech_like_utterance(
    seed: int,
    duration: float = 1.5,
    base_f0: float = 150.0,
    tilt_db_per_octave: float = -6.0,
    sample_rate: int = TARGET_SAMPLE_RATE,
) -> Waveform:
    """Vowel sequence with moving pitch and short pauses.

    Crude stand-in for an utterance: a few voiced segments with distinct
    formant settings joined by silence, so VAD, F0 statistics and crop
    sampling all have realistic structure to work on.
    """
    rng = np.random.default_rng(seed)
    vowel_sets = [
        ((730.0, 90.0), (1090.0, 110.0), (2440.0, 160.0)),
        ((270.0, 60.0), (2290.0, 140.0), (3010.0, 200.0)),
        ((570.0, 80.0), (840.0, 100.0), (2410.0, 160.0)),
    ]
    pieces = []
    remaining = duration
    while remaining > 0.05:
        seg_dur = min(float(rng.uniform(0.25, 0.5)), remaining)
        f0 = base_f0 * 2.0 ** rng.uniform(-0.25, 0.25)
        vowel = vowel_sets[int(rng.integers(len(vowel_sets)))]
        pieces.append(
            harmonic_vowel(
                f0=f0,
                duration=seg_dur,
                sample_rate=sample_rate,
                formants=vowel,
                tilt_db_per_octave=tilt_db_per_octave,
                vibrato_cents=20.0,
            ).samples
        )
        remaining -= seg_dur
        if remaining > 0.1:
            pause = min(float(rng.uniform(0.05, 0.12)), remaining)
            pieces.append(np.zeros(int(pause * sample_rate)))
            remaining -= pause
    return Waveform(np.concatenate(pieces), sample_rate)
