"""Log-domain moment matching for F0 between two emotion domains.

Estimates per-domain statistics of voiced log-F0 and maps a pitch track
from one domain onto the other; unvoiced frames stay untouched.
"""

import numpy as np

from emovc import analyze, convert_f0, estimate_logf0_stats
from emovc.signals import speech_like_utterance


def domain_tracks(base_f0, seed0, n=3):
    tracks = []
    for i in range(n):
        w = speech_like_utterance(seed0 + i, duration=1.2, base_f0=base_f0)
        tracks.append(analyze(w).f0)
    return tracks


def main():
    calm_tracks = domain_tracks(base_f0=120.0, seed0=0)
    excited_tracks = domain_tracks(base_f0=210.0, seed0=50)

    calm = estimate_logf0_stats(calm_tracks, speaker="spk1", emotion="neu")
    excited = estimate_logf0_stats(excited_tracks, speaker="spk1", emotion="ang")
    for stats in (calm, excited):
        print(f"{stats.emotion}: mu={stats.mu:.3f} (≈{np.exp(stats.mu):.0f} Hz),"
              f" sigma={stats.sigma:.3f}, voiced frames={stats.n_frames}")

    track = calm_tracks[0]
    converted = convert_f0(track, calm, excited)
    voiced = track > 0
    print(f"median F0: {np.median(track[voiced]):.1f} Hz ->"
          f" {np.median(converted[voiced]):.1f} Hz")
    print(f"voicing pattern preserved: {np.array_equal(converted > 0, voiced)}")

    back = convert_f0(converted, excited, calm)
    print(f"inverse round-trip max relative error:"
          f" {np.max(np.abs(back[voiced] / track[voiced] - 1)):.2e}")


if __name__ == "__main__":
    main()
