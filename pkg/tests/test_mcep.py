import numpy as np
import pytest

from emovc import vocoder
from emovc.errors import EmptyDomainError, InvalidInputError, ShapeError
from emovc.mcep import (
    McepSeq, McepStats, _freqt, denormalize, energy_vad, frame_energy_db,
    load_mcep_stats, log_spectral_distortion_db, mcep_stats, mcep_to_sp,
    normalize, save_mcep_stats, sp_to_mcep,
)
from emovc.vocoder import VocoderFrames


def formant_like_envelope(t=32, k=513):
    """Smooth positive envelope with a few resonance bumps."""
    freq = np.linspace(0, 8000, k)
    log_sp = np.zeros((t, k))
    for i in range(t):
        for center, height in ((500 + 10 * i, 4.0), (1500, 3.0), (3000, 2.0)):
            log_sp[i] += height * np.exp(-0.5 * ((freq - center) / 200.0) ** 2)
        log_sp[i] -= freq / 4000.0
    return np.exp(log_sp)


def test_flat_envelope_coefficients():
    sp = np.full((10, 513), 4.0)
    m = sp_to_mcep(sp, 24)
    assert m.coeffs.shape == (24, 10)
    np.testing.assert_allclose(m.coeffs[0], 0.5 * np.log(4.0), atol=1e-12)
    np.testing.assert_allclose(m.coeffs[1:], 0.0, atol=1e-12)


def test_zero_coefficients_decode_to_unit_envelope():
    sp = mcep_to_sp(McepSeq(np.zeros((24, 5))))
    np.testing.assert_allclose(sp, 1.0, atol=1e-12)
    assert sp.shape == (5, 513)


def test_shape_contract():
    sp = formant_like_envelope(t=128)
    m = sp_to_mcep(sp, 24)
    assert m.coeffs.shape == (24, 128)
    assert mcep_to_sp(m).shape == (128, 513)


def test_rejects_nonpositive_envelope():
    sp = np.ones((4, 513))
    sp[1, 5] = 0.0
    with pytest.raises(InvalidInputError):
        sp_to_mcep(sp)


def test_rejects_bad_row_count():
    with pytest.raises(ShapeError):
        mcep_to_sp(McepSeq(np.zeros((600, 4)), fft_size=1024))


def test_distortion_decreases_with_order():
    sp = formant_like_envelope()
    lsd = [
        log_spectral_distortion_db(mcep_to_sp(sp_to_mcep(sp, order)), sp)
        for order in (8, 16, 24)
    ]
    assert lsd[0] > lsd[1] > lsd[2]


def test_roundtrip_distortion_bounded_on_noise_envelope():
    rng = np.random.default_rng(1)
    sp = np.exp(rng.standard_normal((16, 513)) * 0.3)
    prev = np.inf
    for order in (8, 16, 24):
        lsd = log_spectral_distortion_db(mcep_to_sp(sp_to_mcep(sp, order)), sp)
        assert np.isfinite(lsd)
        assert lsd <= prev + 1e-9
        prev = lsd


def test_freqt_matches_quadrature_oracle():
    # warped coefficients are the cosine moments of the log spectrum
    # over the warped frequency axis; compare against direct quadrature
    rng = np.random.default_rng(0)
    ctilde = np.zeros(40)
    ctilde[:8] = rng.standard_normal(8)
    alpha = 0.42
    lam = np.linspace(0, np.pi, 20001)
    z = (np.exp(-1j * lam) + alpha) / (1 + alpha * np.exp(-1j * lam))
    omega = -np.angle(z)
    spectrum = ctilde[0] + sum(ctilde[k] * np.cos(k * omega) for k in range(1, 8))
    expected = [np.trapezoid(spectrum, lam) / np.pi]
    expected += [
        2 * np.trapezoid(spectrum * np.cos(k * lam), lam) / np.pi for k in range(1, 6)
    ]
    got = _freqt(ctilde[:, None], 6, alpha)[:, 0]
    np.testing.assert_allclose(got, expected, atol=1e-6)


def test_freqt_zero_alpha_is_truncation():
    rng = np.random.default_rng(2)
    c = rng.standard_normal((10, 3))
    np.testing.assert_allclose(_freqt(c, 6, 0.0), c[:6], atol=1e-12)


def test_normalize_roundtrip_and_moments():
    rng = np.random.default_rng(3)
    m = McepSeq(rng.standard_normal((24, 50)) * 3.0 + 1.0)
    stats = mcep_stats([m])
    normed = normalize(m, stats)
    back = denormalize(normed, stats)
    np.testing.assert_allclose(back.coeffs, m.coeffs, atol=1e-6)
    np.testing.assert_allclose(normed.coeffs.mean(axis=1), 0.0, atol=1e-6)
    np.testing.assert_allclose(normed.coeffs.std(axis=1), 1.0, atol=1e-6)
    # the other composition order is an identity too
    np.testing.assert_allclose(
        normalize(denormalize(m, stats), stats).coeffs, m.coeffs, atol=1e-6
    )


def test_normalize_of_mean_is_zero():
    stats = McepStats(np.arange(24.0), np.ones(24))
    m = McepSeq(np.repeat(np.arange(24.0)[:, None], 7, axis=1))
    np.testing.assert_allclose(normalize(m, stats).coeffs, 0.0, atol=1e-12)


def test_stats_std_floor():
    m = McepSeq(np.ones((24, 9)))
    stats = mcep_stats([m])
    assert np.all(stats.std == 1e-5)


def test_stats_json_roundtrip(tmp_path):
    stats = McepStats(np.arange(24.0), np.linspace(0.5, 2.0, 24))
    path = tmp_path / "stats.json"
    save_mcep_stats(stats, path, speaker="spk")
    back = load_mcep_stats(path)
    np.testing.assert_array_equal(back.mean, stats.mean)
    np.testing.assert_array_equal(back.std, stats.std)


def _frames_with_energy(energies_db):
    k = 513
    sp = np.stack([np.full(k, 10.0 ** (e / 10.0) / k) for e in energies_db])
    t = len(energies_db)
    return VocoderFrames(f0=np.zeros(t), sp=sp, ap=np.ones((t, k)))


def test_vad_removes_silent_segment():
    # 0.5 s silence then 0.5 s tone: the silent half disappears
    from emovc.signals import harmonic_vowel, silence
    from emovc.audio import Waveform

    quiet = silence(0.5).samples
    loud = harmonic_vowel(150.0, 0.5).samples
    w = Waveform(np.concatenate([quiet, loud]))
    v = vocoder.analyze(w)
    m = sp_to_mcep(v.sp)
    kept_m, kept_v = energy_vad(m, v, threshold_db=30.0)
    boundary = int(0.5 * 1000 / 5)
    removed = v.n_frames - kept_v.n_frames
    assert boundary - 2 <= removed <= boundary + 2
    # surviving frames are the loud tail, order preserved
    np.testing.assert_array_equal(kept_v.f0, v.f0[v.n_frames - kept_v.n_frames:])


def test_vad_keeps_equal_energy_frames():
    frames = _frames_with_energy([20.0] * 6)
    m = McepSeq(np.zeros((24, 6)))
    kept_m, kept_v = energy_vad(m, frames, threshold_db=30.0)
    assert kept_v.n_frames == 6


def test_vad_infinite_threshold_is_identity():
    frames = _frames_with_energy([0.0, -50.0, -100.0])
    m = McepSeq(np.random.default_rng(0).standard_normal((24, 3)))
    kept_m, kept_v = energy_vad(m, frames, threshold_db=np.inf)
    np.testing.assert_array_equal(kept_m.coeffs, m.coeffs)
    assert kept_v.n_frames == 3


def test_vad_monotone_injective_mapping():
    energies = [0.0, -40.0, -10.0, -35.0, -5.0]
    frames = _frames_with_energy(energies)
    m = McepSeq(np.arange(24 * 5, dtype=float).reshape(24, 5))
    kept_m, kept_v = energy_vad(m, frames, threshold_db=30.0)
    # frame identity rides in the coefficients: surviving columns appear
    # in their original order
    survivors = [int(c) for c in kept_m.coeffs[0]]
    assert survivors == sorted(survivors)
    assert kept_v.n_frames == 3  # -40 and -35 dropped
    assert kept_v.n_frames <= frames.n_frames


def test_vad_all_removed_is_error():
    frames = _frames_with_energy([0.0, 0.0])
    m = McepSeq(np.zeros((24, 2)))
    with pytest.raises(EmptyDomainError):
        energy_vad(m, frames, threshold_db=-10.0)


def test_frame_energy_definition():
    frames = _frames_with_energy([12.0, -8.0])
    np.testing.assert_allclose(frame_energy_db(frames), [12.0, -8.0], atol=1e-6)
