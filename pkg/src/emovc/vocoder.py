"""Vocoder analysis/synthesis: waveform <-> (F0, spectral envelope, aperiodicity).

Frames are spaced 5 ms apart. Analysis produces, per frame, a fundamental
frequency in Hz (0 for unvoiced frames), a strictly positive one-sided
power spectral envelope (fft_size/2 + 1 bins) and a band aperiodicity in
[0, 1]. Synthesis excites the envelope with a pulse train (voiced) and
shaped noise (unvoiced/aperiodic component).

Backends are pluggable behind `analyze`/`synthesize`. The default
`pulse_noise` backend is self-contained (numpy only): F0 via the
cumulative-mean normalized difference function with parabolic refinement,
envelope via pitch-adaptive cepstral liftering of the short-time power
spectrum, synthesis via minimum-phase impulse responses. A `world`
backend using pyworld is registered when that package is importable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import TARGET_SAMPLE_RATE, Waveform
from .errors import ConfigurationError, InvalidInputError, ShapeError

FRAME_PERIOD_MS = 5.0
FFT_SIZE = 1024
F0_FLOOR = 60.0
F0_CEIL = 500.0


@dataclass
class VocoderFrames:
    """Per-frame vocoder features sharing a common frame count T."""

    f0: np.ndarray            # (T,) Hz, 0 => unvoiced
    sp: np.ndarray            # (T, K) power envelope, K = fft_size/2 + 1
    ap: np.ndarray            # (T, K) aperiodicity in [0, 1]
    frame_period_ms: float = FRAME_PERIOD_MS
    sample_rate: int = TARGET_SAMPLE_RATE
    fft_size: int = FFT_SIZE

    def __post_init__(self):
        self.f0 = np.ascontiguousarray(self.f0, dtype=np.float64)
        self.sp = np.ascontiguousarray(self.sp, dtype=np.float64)
        self.ap = np.ascontiguousarray(self.ap, dtype=np.float64)

    @property
    def n_frames(self) -> int:
        return self.f0.shape[0]

    def validate(self) -> "VocoderFrames":
        if self.f0.ndim != 1 or self.sp.ndim != 2 or self.ap.ndim != 2:
            raise ShapeError("f0 must be 1-D and sp/ap 2-D")
        t = self.f0.shape[0]
        if self.sp.shape[0] != t or self.ap.shape[0] != t:
            raise ShapeError(
                f"frame counts differ: f0 {t}, sp {self.sp.shape[0]}, ap {self.ap.shape[0]}"
            )
        if self.sp.shape[1] != self.ap.shape[1]:
            raise ShapeError("sp and ap must have the same number of bins")
        if self.sp.shape[1] != self.fft_size // 2 + 1:
            raise ShapeError(
                f"sp has {self.sp.shape[1]} bins, expected fft_size/2+1 = {self.fft_size // 2 + 1}"
            )
        if not (np.all(np.isfinite(self.f0)) and np.all(np.isfinite(self.sp))):
            raise InvalidInputError("non-finite values in vocoder frames")
        if np.any(self.f0 < 0):
            raise InvalidInputError("negative f0")
        if np.any(self.sp <= 0):
            raise InvalidInputError("spectral envelope must be strictly positive")
        if np.any(self.ap < 0) or np.any(self.ap > 1):
            raise InvalidInputError("aperiodicity must lie in [0, 1]")
        return self

    def voiced_mask(self) -> np.ndarray:
        return self.f0 > 0


def _hop_samples(sample_rate: int, frame_period_ms: float) -> int:
    return int(round(sample_rate * frame_period_ms / 1000.0))


def _min_phase_response(power: np.ndarray, fft_size: int) -> np.ndarray:
    """Causal minimum-phase impulse response whose |FFT|^2 equals `power`."""
    log_mag = 0.5 * np.log(np.maximum(power, 1e-280))
    cep = np.fft.irfft(log_mag, fft_size)
    folded = np.zeros(fft_size)
    half = fft_size // 2
    folded[0] = cep[0]
    folded[1:half] = 2.0 * cep[1:half]
    folded[half] = cep[half]
    spectrum = np.exp(np.fft.fft(folded))
    return np.fft.ifft(spectrum).real


class PulseNoiseBackend:
    """Self-contained analysis/synthesis backend (no external vocoder).

    Parameters
    ----------
    f0_floor, f0_ceil : float
        F0 search range in Hz.
    dip_threshold : float
        Normalized-difference value under which the first dip is taken.
    voicing_threshold : float
        Frames whose best dip exceeds this are marked unvoiced.
    """

    name = "pulse_noise"

    def __init__(self, f0_floor=F0_FLOOR, f0_ceil=F0_CEIL,
                 dip_threshold=0.15, voicing_threshold=0.35):
        self.f0_floor = f0_floor
        self.f0_ceil = f0_ceil
        self.dip_threshold = dip_threshold
        self.voicing_threshold = voicing_threshold

    # ---------------- analysis ----------------

    def analyze(self, samples: np.ndarray, sample_rate: int,
                frame_period_ms: float, fft_size: int):
        hop = _hop_samples(sample_rate, frame_period_ms)
        n = samples.shape[0]
        n_frames = n // hop + 1
        centers = np.arange(n_frames) * hop

        f0, dip_values = self._track_f0(samples, sample_rate, centers)
        sp = self._envelope(samples, sample_rate, centers, f0, fft_size)
        n_bins = fft_size // 2 + 1
        band_ap = np.where(f0 > 0, np.sqrt(np.clip(dip_values, 1e-4, 0.81)), 1.0)
        ap = np.repeat(band_ap[:, None], n_bins, axis=1)
        return f0, sp, ap

    def _track_f0(self, samples, sample_rate, centers):
        window = 512
        tau_min = int(sample_rate / self.f0_ceil)
        tau_max = int(np.ceil(sample_rate / self.f0_floor))
        seg_len = window + tau_max
        half = seg_len // 2
        padded = np.pad(samples, (half, seg_len))

        n_frames = centers.shape[0]
        nfft = 1 << int(np.ceil(np.log2(seg_len)))
        # padded index c spans original samples [c - half, c - half + seg_len),
        # so each segment is centered on its frame position
        segs = np.stack([padded[c:c + seg_len] for c in centers])
        head = segs[:, :window]

        # difference function d(tau) = E(0) + E(tau) - 2 r(tau), via FFT correlation
        spec_full = np.fft.rfft(segs, nfft, axis=1)
        spec_head = np.fft.rfft(head, nfft, axis=1)
        corr = np.fft.irfft(np.conj(spec_head) * spec_full, nfft, axis=1)[:, :tau_max + 1]
        csum = np.concatenate(
            [np.zeros((n_frames, 1)), np.cumsum(segs ** 2, axis=1)], axis=1
        )
        energy = csum[:, window:window + tau_max + 1] - csum[:, :tau_max + 1]
        diff = energy[:, :1] + energy - 2.0 * corr
        diff[:, 0] = 0.0

        # cumulative-mean normalization
        running = np.cumsum(diff[:, 1:], axis=1)
        taus = np.arange(1, tau_max + 1)
        norm = np.ones((n_frames, tau_max + 1))
        with np.errstate(invalid="ignore", divide="ignore"):
            norm[:, 1:] = np.where(running > 0, diff[:, 1:] * taus / running, 1.0)

        f0 = np.zeros(n_frames)
        dips = np.ones(n_frames)
        frame_energy = energy[:, 0]
        for i in range(n_frames):
            if frame_energy[i] < 1e-10:
                continue
            row = norm[i]
            tau = self._pick_dip(row, tau_min, tau_max)
            if tau is None or row[tau] > self.voicing_threshold:
                continue
            tau_refined = self._parabolic(diff[i], tau)
            f0[i] = float(np.clip(sample_rate / tau_refined, self.f0_floor, self.f0_ceil))
            dips[i] = max(row[tau], 0.0)
        return f0, dips

    def _pick_dip(self, row, tau_min, tau_max):
        below = np.nonzero(row[tau_min:tau_max] < self.dip_threshold)[0]
        if below.size:
            tau = tau_min + below[0]
            while tau + 1 < tau_max and row[tau + 1] < row[tau]:
                tau += 1
            return tau
        tau = tau_min + int(np.argmin(row[tau_min:tau_max]))
        return tau

    @staticmethod
    def _parabolic(diff_row, tau):
        if 0 < tau < diff_row.shape[0] - 1:
            a, b, c = diff_row[tau - 1], diff_row[tau], diff_row[tau + 1]
            denom = a - 2 * b + c
            if abs(denom) > 1e-30:
                shift = 0.5 * (a - c) / denom
                if abs(shift) < 1.0:
                    return tau + shift
        return float(tau)

    def _envelope(self, samples, sample_rate, centers, f0, fft_size):
        window = 512
        half = window // 2
        win = np.hanning(window)
        win_power = np.sum(win ** 2)
        padded = np.pad(samples, (half, window))
        segs = np.stack([padded[c:c + window] for c in centers]) * win
        power = np.abs(np.fft.rfft(segs, fft_size, axis=1)) ** 2 / win_power
        log_power = np.log(np.maximum(power, 1e-20))

        # pitch-adaptive cepstral smoothing: cut below the pitch quefrency
        cep = np.fft.irfft(log_power, fft_size, axis=1)
        cutoff = np.where(
            f0 > 0, (0.8 * sample_rate / np.maximum(f0, 1.0)), 60.0
        ).astype(int)
        quef = np.arange(fft_size)
        quef_sym = np.minimum(quef, fft_size - quef)
        lifter = (quef_sym[None, :] <= cutoff[:, None]).astype(float)
        smoothed = np.fft.rfft(cep * lifter, fft_size, axis=1).real
        return np.exp(smoothed)

    # ---------------- synthesis ----------------

    def synthesize(self, f0, sp, ap, sample_rate, frame_period_ms, fft_size):
        hop = _hop_samples(sample_rate, frame_period_ms)
        n_frames = f0.shape[0]
        n_out = n_frames * hop
        tail = fft_size
        out = np.zeros(n_out + 2 * tail)

        sample_frame = np.clip(
            np.round(np.arange(n_out) / hop).astype(int), 0, n_frames - 1
        )
        voiced_s = f0[sample_frame] > 0

        # pulse clock runs everywhere; pulses are only emitted in voiced spans
        clock = np.where(f0 > 0, f0, 150.0)
        clock_s = np.interp(np.arange(n_out), np.arange(n_frames) * hop, clock)
        phase = np.cumsum(2 * np.pi * clock_s / sample_rate)
        wraps = np.nonzero(np.diff(np.floor(phase / (2 * np.pi))) > 0)[0] + 1

        periodic_cache: dict[int, np.ndarray] = {}
        for p in wraps:
            if not voiced_s[p]:
                continue
            i = sample_frame[p]
            h = periodic_cache.get(i)
            if h is None:
                periodic = sp[i] * (1.0 - ap[i] ** 2)
                h = _min_phase_response(periodic, fft_size)
                periodic_cache[i] = h
            period = sample_rate / clock_s[p]
            out[p:p + fft_size] += np.sqrt(period) * h

        # noise component, 50%-overlapped Hann frames (COLA at hop spacing)
        rng = np.random.default_rng(1999)
        noise = rng.standard_normal(n_out + 2 * hop)
        noise_win = np.hanning(2 * hop + 1)[:-1]
        for i in range(n_frames):
            if f0[i] > 0:
                noise_power = sp[i] * ap[i] ** 2
            else:
                noise_power = sp[i]
            h = _min_phase_response(noise_power, fft_size)
            seg = noise[i * hop:i * hop + 2 * hop] * noise_win
            shaped = np.fft.irfft(
                np.fft.rfft(seg, 2 * fft_size) * np.fft.rfft(h, 2 * fft_size),
                2 * fft_size,
            )[: 2 * hop + fft_size]
            start = i * hop - hop + tail
            out[start:start + shaped.shape[0]] += shaped

        return out[tail:tail + n_out]


class WorldBackend:
    """Adapter for the pyworld vocoder, if installed."""

    name = "world"

    def __init__(self):
        try:
            import pyworld
        except ImportError as exc:
            raise ConfigurationError(
                "the 'world' backend requires the pyworld package"
            ) from exc
        self._pw = pyworld

    def analyze(self, samples, sample_rate, frame_period_ms, fft_size):
        pw = self._pw
        x = np.ascontiguousarray(samples, dtype=np.float64)
        f0, time_axis = pw.harvest(x, sample_rate, frame_period=frame_period_ms)
        sp = pw.cheaptrick(x, f0, time_axis, sample_rate, fft_size=fft_size)
        ap = pw.d4c(x, f0, time_axis, sample_rate, fft_size=fft_size)
        return f0, sp, ap

    def synthesize(self, f0, sp, ap, sample_rate, frame_period_ms, fft_size):
        return self._pw.synthesize(
            np.ascontiguousarray(f0),
            np.ascontiguousarray(sp),
            np.ascontiguousarray(ap),
            sample_rate,
            frame_period_ms,
        )


_BACKENDS = {
    PulseNoiseBackend.name: PulseNoiseBackend,
    WorldBackend.name: WorldBackend,
}
DEFAULT_BACKEND = PulseNoiseBackend.name


def register_backend(name: str, factory) -> None:
    _BACKENDS[name] = factory


def get_backend(name: str | None = None):
    key = name or DEFAULT_BACKEND
    try:
        factory = _BACKENDS[key]
    except KeyError:
        raise ConfigurationError(
            f"unknown vocoder backend {key!r}; available: {sorted(_BACKENDS)}"
        ) from None
    return factory() if isinstance(factory, type) else factory


def analyze(w: Waveform, backend: str | None = None,
            frame_period_ms: float = FRAME_PERIOD_MS,
            fft_size: int = FFT_SIZE) -> VocoderFrames:
    """Decompose a 16 kHz waveform into (f0, sp, ap) at a 5 ms hop."""
    if w.samples.size == 0:
        raise InvalidInputError("cannot analyze an empty waveform")
    if not np.all(np.isfinite(w.samples)):
        raise InvalidInputError("waveform contains non-finite samples")
    if w.sample_rate != TARGET_SAMPLE_RATE:
        raise InvalidInputError(
            f"analysis expects {TARGET_SAMPLE_RATE} Hz input, got {w.sample_rate};"
            " resample at ingestion"
        )
    f0, sp, ap = get_backend(backend).analyze(
        w.samples, w.sample_rate, frame_period_ms, fft_size
    )
    return VocoderFrames(
        f0, sp, ap, frame_period_ms=frame_period_ms,
        sample_rate=w.sample_rate, fft_size=fft_size,
    ).validate()


def synthesize(v: VocoderFrames, backend: str | None = None) -> Waveform:
    """Render a waveform; output length is exactly n_frames * hop samples."""
    v.validate()
    samples = get_backend(backend).synthesize(
        v.f0, v.sp, v.ap, v.sample_rate, v.frame_period_ms, v.fft_size
    )
    return Waveform(np.asarray(samples, dtype=np.float64), v.sample_rate)
