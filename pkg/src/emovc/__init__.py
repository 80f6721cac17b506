"""Nonparallel emotional speech conversion toolkit.

A two-domain content/style autoencoder with a GAN critic converts the
spectral envelope; F0 is converted by matching log-domain moments;
aperiodicity passes through unchanged. No paired or time-aligned
utterances are required for training.
"""

from .audio import Waveform, read_wav, write_wav
from .errors import EmovcError
from .mcep import McepSeq, McepStats, mcep_to_sp, sp_to_mcep
from .prosody import LogF0Stats, convert_f0, estimate_logf0_stats
from .vocoder import VocoderFrames, analyze, synthesize

__version__ = "0.1.0"

__all__ = [
    "EmovcError",
    "LogF0Stats",
    "McepSeq",
    "McepStats",
    "VocoderFrames",
    "Waveform",
    "analyze",
    "convert_f0",
    "estimate_logf0_stats",
    "mcep_to_sp",
    "read_wav",
    "sp_to_mcep",
    "synthesize",
    "write_wav",
    "__version__",
]
