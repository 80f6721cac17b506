"""Full conversion of one utterance with a trained checkpoint.

Expects the artifacts written by 05_train_toy_corpus.py in the working
directory (run that first). Converts a calm utterance toward the excited
domain and also produces the F0-only baseline for comparison.
"""

import importlib.util
from pathlib import Path

import numpy as np

from emovc import analyze, estimate_logf0_stats, write_wav
from emovc.mcep import mcep_stats, save_mcep_stats
from emovc.pipeline import (
    ConversionConfig, Converter, logf0_stats_path, mcep_stats_path,
)
from emovc.prosody import save_logf0_stats
from emovc.signals import speech_like_utterance


def load_train_demo():
    spec = importlib.util.spec_from_file_location(
        "train_demo", Path(__file__).parent / "05_train_toy_corpus.py"
    )
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def rebuild_stats(stats_dir):
    # recreate the toy corpus statistics next to the demo checkpoint
    train_demo = load_train_demo()
    records = []
    for emotion, (base_f0, tilt, seed0) in train_demo.DOMAINS.items():
        records += [train_demo.extract(seed0 + i, emotion, base_f0, tilt)
                    for i in range(4)]
    stats_dir.mkdir(exist_ok=True)
    save_mcep_stats(mcep_stats(r.mcep_seq() for r in records),
                    mcep_stats_path(stats_dir, "spk1"), speaker="spk1")
    for emotion in ("neu", "ang"):
        logf0 = estimate_logf0_stats(
            (r.f0 for r in records if r.emotion == emotion), "spk1", emotion
        )
        save_logf0_stats(logf0, logf0_stats_path(stats_dir, "spk1", emotion))


def main():
    ckpt = Path("demo_model.ckpt")
    if not ckpt.exists():
        raise SystemExit("run 05_train_toy_corpus.py first (missing demo_model.ckpt)")
    stats_dir = Path("demo_stats")
    rebuild_stats(stats_dir)

    utterance = speech_like_utterance(7, duration=1.4, base_f0=125.0,
                                      tilt_db_per_octave=-3.0)
    write_wav("demo_input.wav", utterance)

    for label, f0_only in (("full", False), ("f0_only", True)):
        converter = Converter(ConversionConfig(
            direction="1to2", stats_dir=str(stats_dir),
            checkpoint=str(ckpt), f0_only=f0_only,
        ))
        out = converter.convert_utterance(utterance)
        name = f"demo_converted_{label}.wav"
        write_wav(name, out)
        frames_in = analyze(utterance)
        frames_out = analyze(out)
        voiced_in = frames_in.f0[frames_in.f0 > 0]
        voiced_out = frames_out.f0[frames_out.f0 > 0]
        print(f"{label}: median F0 {np.median(voiced_in):.0f} ->"
              f" {np.median(voiced_out):.0f} Hz, wrote {name}")


if __name__ == "__main__":
    main()
