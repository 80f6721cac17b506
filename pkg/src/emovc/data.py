"""Manifest ingestion, per-domain corpora, splits, crops and batches.

A corpus is addressed by CSV manifest with header
``audio_path,speaker,session,emotion,split`` (split may be empty).
Training material is organized per (speaker, emotion) domain; batches
are fixed-length 128-frame crops of normalized mel-cepstra.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cache import FeatureRecord
from .errors import EmptyDomainError, InvalidInputError, ParseError
from .mcep import McepStats, mcep_stats, normalize
from .prosody import LogF0Stats, estimate_logf0_stats

EMOTIONS = ("ang", "hap", "neu", "sad")
CROP_LEN = 128
MANIFEST_COLUMNS = ("audio_path", "speaker", "session", "emotion", "split")


@dataclass
class ManifestEntry:
    audio_path: str
    speaker: str
    session: str
    emotion: str
    split: str = ""             # "", "train" or "test"


def load_manifest(path) -> list[ManifestEntry]:
    """Parse the manifest CSV; rejects unknown emotions and duplicates."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"manifest not found: {path}")
    entries: list[ManifestEntry] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("manifest is empty") from None
        header = [h.strip() for h in header]
        if header[:4] != list(MANIFEST_COLUMNS[:4]):
            raise ParseError(
                f"unexpected header {header!r}, expected {','.join(MANIFEST_COLUMNS)}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) not in (4, 5):
                raise ParseError(f"expected 4 or 5 fields, got {len(row)}", line=lineno)
            audio_path, speaker, session, emotion = (c.strip() for c in row[:4])
            split = row[4].strip() if len(row) == 5 else ""
            if not audio_path:
                raise ParseError("empty audio_path", line=lineno)
            if emotion not in EMOTIONS:
                raise ParseError(
                    f"unknown emotion {emotion!r}, expected one of {EMOTIONS}", line=lineno
                )
            if split not in ("", "train", "test"):
                raise ParseError(f"unknown split {split!r}", line=lineno)
            entries.append(ManifestEntry(audio_path, speaker, session, emotion, split))
    if not entries:
        raise ParseError("manifest has no data rows")
    seen: dict[str, int] = {}
    for e in entries:
        if e.audio_path in seen:
            raise ParseError(f"duplicate audio_path {e.audio_path!r}")
        seen[e.audio_path] = 1
    return entries


def split_train_test(entries, ratio: float = 0.8, seed: int = 0):
    """Stratified per (speaker, emotion) split.

    Each stratum is shuffled deterministically and the first
    floor(ratio * n) entries go to train. Entries carrying an explicit
    split label keep it and do not participate in the draw.
    """
    if not entries:
        raise InvalidInputError("no entries to split")
    if not 0.0 <= ratio <= 1.0:
        raise InvalidInputError(f"ratio must be in [0, 1], got {ratio}")
    train: list[ManifestEntry] = []
    test: list[ManifestEntry] = []
    undecided: dict[tuple, list[ManifestEntry]] = {}
    for e in entries:
        if e.split == "train":
            train.append(e)
        elif e.split == "test":
            test.append(e)
        else:
            undecided.setdefault((e.speaker, e.emotion), []).append(e)
    rng = np.random.default_rng(seed)
    for key in sorted(undecided):
        group = undecided[key]
        order = rng.permutation(len(group))
        n_train = int(np.floor(ratio * len(group)))
        for rank, idx in enumerate(order):
            (train if rank < n_train else test).append(group[idx])
    return train, test


def sample_crop(mcep: np.ndarray, length: int = CROP_LEN,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Contiguous `length`-frame window; short inputs are reflect-padded."""
    mcep = np.asarray(mcep)
    if mcep.ndim != 2 or mcep.shape[1] == 0:
        raise InvalidInputError(f"utterance matrix must be (order, T>0), got {mcep.shape}")
    t = mcep.shape[1]
    if t < length:
        pad = length - t
        mode = "reflect" if t > 1 else "edge"
        return np.pad(mcep, ((0, 0), (0, pad)), mode=mode)
    if t == length:
        return mcep.copy()
    if rng is None:
        rng = np.random.default_rng()
    start = int(rng.integers(0, t - length + 1))
    return mcep[:, start:start + length].copy()


@dataclass
class DomainCorpus:
    """All training utterances of one (speaker, emotion) domain."""

    speaker: str
    emotion: str
    utterances: list[FeatureRecord]
    mcep_stats: McepStats
    logf0_stats: LogF0Stats
    _normalized: list[np.ndarray] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.utterances:
            raise EmptyDomainError(f"domain ({self.speaker}, {self.emotion}) has no utterances")
        for u in self.utterances:
            if u.speaker != self.speaker or u.emotion != self.emotion:
                raise InvalidInputError(
                    f"utterance labeled ({u.speaker}, {u.emotion}) does not belong to"
                    f" domain ({self.speaker}, {self.emotion})"
                )
        if not self._normalized:
            self._normalized = [
                normalize(u.mcep_seq(), self.mcep_stats).coeffs for u in self.utterances
            ]

    def __len__(self) -> int:
        return len(self.utterances)


def build_corpus(records, speaker: str, emotion: str,
                 stats: McepStats | None = None) -> DomainCorpus:
    """Assemble a domain corpus; stats default to this domain's own pool."""
    records = [r for r in records if r.speaker == speaker and r.emotion == emotion]
    if not records:
        raise EmptyDomainError(f"no cached features for ({speaker}, {emotion})")
    if stats is None:
        stats = mcep_stats(r.mcep_seq() for r in records)
    logf0 = estimate_logf0_stats(
        (r.f0 for r in records), speaker=speaker, emotion=emotion
    )
    return DomainCorpus(speaker, emotion, records, stats, logf0)


@dataclass
class TrainingBatch:
    """Paired batches of normalized crops, one per emotion domain."""

    x1: np.ndarray              # (B, order, CROP_LEN)
    x2: np.ndarray              # (B, order, CROP_LEN)


def make_batch(corpus1: DomainCorpus, corpus2: DomainCorpus,
               batch_size: int, rng: np.random.Generator) -> TrainingBatch:
    """Sample utterances uniformly, then one crop from each."""
    def draw(corpus: DomainCorpus) -> np.ndarray:
        crops = []
        for _ in range(batch_size):
            idx = int(rng.integers(0, len(corpus)))
            crops.append(sample_crop(corpus._normalized[idx], CROP_LEN, rng))
        return np.stack(crops)

    if batch_size < 1:
        raise InvalidInputError("batch_size must be >= 1")
    return TrainingBatch(draw(corpus1), draw(corpus2))
