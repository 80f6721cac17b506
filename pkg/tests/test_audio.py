import numpy as np
import pytest

from emovc.audio import Waveform, read_wav, resample, write_wav
from emovc.errors import InvalidInputError
from emovc.signals import harmonic_vowel


def test_waveform_rejects_nan():
    with pytest.raises(InvalidInputError):
        Waveform(np.array([0.0, np.nan]))


def test_waveform_rejects_stereo():
    with pytest.raises(InvalidInputError):
        Waveform(np.zeros((2, 100)))


def test_wav_roundtrip_quantization(tmp_path):
    w = harmonic_vowel(150.0, 0.2)
    path = tmp_path / "v.wav"
    write_wav(path, w)
    back = read_wav(path)
    assert back.sample_rate == 16000
    assert back.samples.shape == w.samples.shape
    # 16-bit quantization noise only
    assert np.max(np.abs(back.samples - w.samples)) < 2.0 / 32768


def test_read_resamples_to_16k(tmp_path):
    w = harmonic_vowel(200.0, 0.25, sample_rate=8000)
    path = tmp_path / "v8k.wav"
    write_wav(path, w)
    back = read_wav(path)
    assert back.sample_rate == 16000
    assert abs(back.samples.size - 2 * w.samples.size) <= 2


def test_resample_identity():
    w = harmonic_vowel(150.0, 0.1)
    assert resample(w, 16000) is w


def test_write_clips_out_of_range(tmp_path):
    w = Waveform(np.array([2.0, -2.0, 0.5]))
    path = tmp_path / "c.wav"
    write_wav(path, w)
    back = read_wav(path)
    assert np.all(back.samples <= 1.0) and np.all(back.samples >= -1.0)
