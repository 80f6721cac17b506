import csv
from pathlib import Path

import pytest
import torch

from emovc import mcep, vocoder
from emovc.audio import write_wav
from emovc.cache import FeatureRecord
from emovc.signals import harmonic_vowel, speech_like_utterance

# small tensors: a single thread is both fastest and deterministic here
torch.set_num_threads(1)


@pytest.fixture(scope="session")
def vowel150():
    return harmonic_vowel(150.0, 1.0)


@pytest.fixture(scope="session")
def vowel_frames(vowel150):
    return vocoder.analyze(vowel150)


def synth_record(seed: int, speaker: str, emotion: str, tilt: float,
                 base_f0: float, duration: float = 1.6) -> FeatureRecord:
    """Analysis features of one synthetic utterance, silence trimmed."""
    w = speech_like_utterance(seed, duration=duration, base_f0=base_f0,
                              tilt_db_per_octave=tilt)
    v = vocoder.analyze(w)
    m = mcep.sp_to_mcep(v.sp)
    m, v = mcep.energy_vad(m, v)
    return FeatureRecord(
        speaker=speaker, emotion=emotion, session="s1",
        f0=v.f0, mcep=m.coeffs, ap=v.ap,
        frame_period_ms=v.frame_period_ms, sample_rate=v.sample_rate,
        fft_size=v.fft_size, alpha=m.alpha,
    )


# the two toy "emotions": same speaker, different pitch level and
# spectral tilt, several utterances each
TOY_DOMAINS = {
    "neu": {"base_f0": 130.0, "tilt": -3.0, "seed0": 0},
    "ang": {"base_f0": 190.0, "tilt": -9.0, "seed0": 100},
}


def make_toy_records(n_per_domain: int = 4, speaker: str = "spk1"):
    records = []
    for emotion, spec in TOY_DOMAINS.items():
        for i in range(n_per_domain):
            records.append(
                synth_record(spec["seed0"] + i, speaker, emotion,
                             spec["tilt"], spec["base_f0"])
            )
    return records


def write_toy_corpus(root: Path, n_per_domain: int = 3, speaker: str = "spk1",
                     duration: float = 1.2):
    """WAV files plus manifest under `root`; returns the manifest path."""
    audio_dir = root / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for emotion, spec in TOY_DOMAINS.items():
        for i in range(n_per_domain):
            w = speech_like_utterance(
                spec["seed0"] + i, duration=duration,
                base_f0=spec["base_f0"], tilt_db_per_octave=spec["tilt"],
            )
            name = f"{emotion}_{i}.wav"
            write_wav(audio_dir / name, w)
            rows.append([f"audio/{name}", speaker, "s1", emotion, ""])
    manifest = root / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["audio_path", "speaker", "session", "emotion", "split"])
        writer.writerows(rows)
    return manifest


@pytest.fixture(scope="session")
def toy_records():
    return make_toy_records(n_per_domain=4)
