"""Coding a spectral envelope into 24 mel-cepstral coefficients and back.

Shows the accuracy/compactness trade-off: reconstruction distortion
shrinks as the number of retained coefficients grows.
"""

import numpy as np

from emovc import analyze, mcep_to_sp, sp_to_mcep
from emovc.mcep import energy_vad, log_spectral_distortion_db, mcep_stats, normalize
from emovc.signals import speech_like_utterance


def main():
    utterance = speech_like_utterance(seed=1, duration=1.5)
    frames = analyze(utterance)
    print(f"analyzed {frames.n_frames} frames, envelope bins {frames.sp.shape[1]}")

    for order in (8, 16, 24, 48):
        coded = sp_to_mcep(frames.sp, order=order)
        lsd = log_spectral_distortion_db(mcep_to_sp(coded), frames.sp)
        print(f"order {order:2d}: log-spectral distortion {lsd:5.2f} dB")

    coded = sp_to_mcep(frames.sp, order=24)
    trimmed_m, trimmed_v = energy_vad(coded, frames, threshold_db=30.0)
    print(f"energy VAD: {frames.n_frames} -> {trimmed_v.n_frames} frames"
          f" ({frames.n_frames - trimmed_v.n_frames} silent frames removed)")

    stats = mcep_stats([trimmed_m])
    normed = normalize(trimmed_m, stats)
    print("normalized coefficient means:",
          np.round(normed.coeffs.mean(axis=1)[:4], 6), "...")
    print("normalized coefficient stds: ",
          np.round(normed.coeffs.std(axis=1)[:4], 6), "...")


if __name__ == "__main__":
    main()
