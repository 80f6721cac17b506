"""Desk-scale training on a synthetic two-emotion corpus.

Builds eight vowel-sequence utterances (two "emotions" distinguished by
pitch level and spectral tilt), extracts features, and runs a short
width-reduced training so the whole loop finishes in about a minute.
For the full-size model and schedule, use the `emovc train` command.
"""

import numpy as np
import torch

from emovc import analyze, sp_to_mcep
from emovc.cache import FeatureRecord
from emovc.data import build_corpus
from emovc.mcep import energy_vad, mcep_stats
from emovc.nets import ConversionModel, ModelConfig
from emovc.signals import speech_like_utterance
from emovc.training import LossWeights, OptimizerSchedule, Trainer, save_checkpoint

torch.set_num_threads(1)

DOMAINS = {"neu": (130.0, -3.0, 0), "ang": (190.0, -9.0, 100)}


def extract(seed, emotion, base_f0, tilt):
    w = speech_like_utterance(seed, duration=1.6, base_f0=base_f0,
                              tilt_db_per_octave=tilt)
    frames = analyze(w)
    coeffs = sp_to_mcep(frames.sp)
    coeffs, frames = energy_vad(coeffs, frames)
    return FeatureRecord("spk1", emotion, "s1", frames.f0, coeffs.coeffs,
                         frames.ap, 5.0, 16000, 1024, coeffs.alpha)


def main():
    records = []
    for emotion, (base_f0, tilt, seed0) in DOMAINS.items():
        records += [extract(seed0 + i, emotion, base_f0, tilt) for i in range(4)]
    stats = mcep_stats(r.mcep_seq() for r in records)
    corpus1 = build_corpus(records, "spk1", "neu", stats)
    corpus2 = build_corpus(records, "spk1", "ang", stats)
    print(f"corpora: {len(corpus1)} + {len(corpus2)} utterances")

    torch.manual_seed(0)
    model = ConversionModel(ModelConfig.scaled(16))
    trainer = Trainer(
        model, LossWeights(),
        OptimizerSchedule(total_iters=300, decay_start=200, ratio_switch_iter=150),
        seed=0, loss_log_path="demo_loss_log.csv",
    )
    report = trainer.fit(corpus1, corpus2, batch_size=4, progress_every=50)
    trainer.close()
    print(f"final: recon {report.recon1 + report.recon2:.3f},"
          f" content cycle {report.c1 + report.c2:.3f}")
    print("domain style means:",
          np.round(trainer.style_state.style(0).numpy()[:4], 3), "|",
          np.round(trainer.style_state.style(1).numpy()[:4], 3))
    save_checkpoint(trainer, "demo_model.ckpt",
                    extra_config={"speaker": "spk1", "emotion_1": "neu",
                                  "emotion_2": "ang"})
    print("wrote demo_model.ckpt and demo_loss_log.csv")


if __name__ == "__main__":
    main()
