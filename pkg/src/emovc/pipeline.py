"""End-to-end conversion and objective evaluation.

An utterance is converted by recombining its content code (source-domain
encoder) with the target domain's aggregated style code, mapping F0
through the log-domain moment transform, and copying aperiodicity
unchanged. With `f0_only` the spectral path is skipped entirely; only F0
moves (the classic linear-transform baseline).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .audio import Waveform
from .errors import ConfigurationError, InvalidInputError
from .mcep import (
    McepSeq, McepStats, denormalize, load_mcep_stats, mcep_to_sp, normalize,
    sp_to_mcep,
)
from .prosody import LogF0Stats, convert_f0, estimate_logf0_stats, load_logf0_stats
from .training import DomainStyleState, load_checkpoint
from .nets import ConversionModel, ModelConfig
from .vocoder import VocoderFrames, analyze, synthesize

DIRECTIONS = {"1to2": (0, 1), "2to1": (1, 0)}


def mcep_stats_path(stats_dir, speaker: str) -> Path:
    return Path(stats_dir) / f"mcep_{speaker}.json"


def logf0_stats_path(stats_dir, speaker: str, emotion: str) -> Path:
    return Path(stats_dir) / f"logf0_{speaker}_{emotion}.json"


def mel_cepstral_distortion_db(a: np.ndarray, b: np.ndarray) -> float:
    """Mean per-frame distortion over shared frames, energy row excluded."""
    t = min(a.shape[1], b.shape[1])
    diff = a[1:, :t] - b[1:, :t]
    per_frame = (10.0 / math.log(10.0)) * np.sqrt(2.0 * np.sum(diff ** 2, axis=0))
    return float(per_frame.mean())


@dataclass
class ConversionConfig:
    """Everything needed to convert one direction of a trained pair."""

    direction: str                   # "1to2" or "2to1"
    stats_dir: str
    checkpoint: str | None = None
    speaker: str = ""
    source_emotion: str = ""
    target_emotion: str = ""
    f0_only: bool = False
    backend: str | None = None
    pad_mode: str = "reflect"

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ConfigurationError(
                f"direction must be one of {sorted(DIRECTIONS)}, got {self.direction!r}"
            )
        if self.checkpoint is None and not self.f0_only:
            raise ConfigurationError("spectral conversion needs a checkpoint")


class Converter:
    """Loads model, style aggregates and statistics once; converts many."""

    def __init__(self, cfg: ConversionConfig):
        self.cfg = cfg
        self.src_idx, self.tgt_idx = DIRECTIONS[cfg.direction]
        self.model = None
        self.style_state = None
        self.mcep_dim = 24

        speaker, src_emo, tgt_emo = cfg.speaker, cfg.source_emotion, cfg.target_emotion
        if cfg.checkpoint is not None:
            payload = load_checkpoint(cfg.checkpoint)
            model = ConversionModel(ModelConfig.from_dict(payload["config"]["model"]))
            model.load_state_dict(payload["nets"])
            model.eval()
            self.model = model
            self.style_state = DomainStyleState.from_state_dict(payload["style_state"])
            self.mcep_dim = model.cfg.mcep_dim
            extra = payload["config"].get("extra", {})
            speaker = speaker or extra.get("speaker", "")
            emotions = (extra.get("emotion_1", ""), extra.get("emotion_2", ""))
            src_emo = src_emo or emotions[self.src_idx]
            tgt_emo = tgt_emo or emotions[self.tgt_idx]
        if not (speaker and src_emo and tgt_emo):
            raise ConfigurationError(
                "speaker and source/target emotions are required (from the checkpoint"
                " or given explicitly)"
            )
        self.speaker, self.source_emotion, self.target_emotion = speaker, src_emo, tgt_emo

        self.mcep_stats: McepStats = load_mcep_stats(
            mcep_stats_path(cfg.stats_dir, speaker)
        )
        self.src_logf0: LogF0Stats = load_logf0_stats(
            logf0_stats_path(cfg.stats_dir, speaker, src_emo)
        )
        self.tgt_logf0: LogF0Stats = load_logf0_stats(
            logf0_stats_path(cfg.stats_dir, speaker, tgt_emo)
        )

    # ---- spectral path ----

    def translate_mcep(self, m: McepSeq, src_idx: int | None = None,
                       tgt_idx: int | None = None,
                       style_source: str = "domain") -> McepSeq:
        """Run normalized coefficients through encoder/decoder of a pair.

        `style_source` picks the style code: "domain" uses the target
        domain's aggregate (conversion), "self" re-encodes the input with
        the target-domain style encoder (the reconstruction path).
        """
        if self.model is None:
            raise ConfigurationError("no checkpoint loaded, spectral path unavailable")
        src = self.src_idx if src_idx is None else src_idx
        tgt = self.tgt_idx if tgt_idx is None else tgt_idx
        norm = normalize(m, self.mcep_stats)
        t = norm.n_frames
        pad = (-t) % 4
        coeffs = norm.coeffs
        if pad:
            mode = self.cfg.pad_mode if t > 1 else "edge"
            coeffs = np.pad(coeffs, ((0, 0), (0, pad)), mode=mode)
        with torch.no_grad():
            x = torch.as_tensor(coeffs, dtype=torch.float32).unsqueeze(0)
            code = self.model.content_encode(src, x)
            if style_source == "self":
                style = self.model.style_encode(tgt, x)
            else:
                style = self.style_state.style(tgt).unsqueeze(0)
            out = self.model.decode(tgt, code, style).squeeze(0).numpy()
        out = out[:, :t].astype(np.float64)
        return denormalize(
            McepSeq(out, alpha=m.alpha, fft_size=m.fft_size), self.mcep_stats
        )

    def convert_frames(self, v: VocoderFrames):
        """Frame-domain conversion; returns (frames_out, mcep_in, mcep_out)."""
        mcep_in = sp_to_mcep(v.sp, order=self.mcep_dim)
        if self.cfg.f0_only:
            mcep_out = mcep_in
            sp_out = v.sp                      # spectral content untouched
        else:
            mcep_out = self.translate_mcep(mcep_in)
            sp_out = mcep_to_sp(mcep_out)
        f0_out = convert_f0(v.f0, self.src_logf0, self.tgt_logf0)
        frames = VocoderFrames(
            f0_out, sp_out, v.ap,
            frame_period_ms=v.frame_period_ms,
            sample_rate=v.sample_rate, fft_size=v.fft_size,
        )
        return frames, mcep_in, mcep_out

    def convert_utterance(self, w: Waveform) -> Waveform:
        """WAV-to-WAV conversion; output has exactly the input's length."""
        v = analyze(w, backend=self.cfg.backend)
        frames, _, _ = self.convert_frames(v)
        out = synthesize(frames, backend=self.cfg.backend)
        n = w.samples.shape[0]
        samples = out.samples
        if samples.shape[0] >= n:
            samples = samples[:n]
        else:
            samples = np.pad(samples, (0, n - samples.shape[0]))
        return Waveform(samples, out.sample_rate)


def convert_utterance(w: Waveform, cfg: ConversionConfig) -> Waveform:
    return Converter(cfg).convert_utterance(w)


# ---------------------------------------------------------------------------
# objective evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    """Objective proxies: reconstruction MCD and prosody moment transport."""

    direction: str
    speaker: str
    source_emotion: str
    target_emotion: str
    utterances: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "speaker": self.speaker,
            "source_emotion": self.source_emotion,
            "target_emotion": self.target_emotion,
            "utterances": self.utterances,
            "aggregates": self.aggregates,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def evaluate(entries, converter: Converter, *, audio_root=None,
             load_waveform=None) -> EvalReport:
    """Score test utterances of the source emotion.

    Per utterance: distortion of the same-domain reconstruction against
    the original coefficients, distance of the converted voiced log-F0
    moments to the target-domain statistics, and the frame-count delta.
    """
    from .audio import read_wav

    if load_waveform is None:
        def load_waveform(entry):
            path = Path(entry.audio_path)
            if audio_root is not None and not path.is_absolute():
                path = Path(audio_root) / path
            return read_wav(path)

    rows = []
    for entry in entries:
        if entry.emotion != converter.source_emotion:
            continue
        w = load_waveform(entry)
        v = analyze(w, backend=converter.cfg.backend)
        frames, mcep_in, _ = converter.convert_frames(v)
        if converter.cfg.f0_only or converter.model is None:
            recon = mcep_in
        else:
            recon = converter.translate_mcep(
                mcep_in, src_idx=converter.src_idx, tgt_idx=converter.src_idx,
                style_source="self",
            )
        mcd = mel_cepstral_distortion_db(recon.coeffs, mcep_in.coeffs)
        voiced = frames.f0[frames.f0 > 0]
        if voiced.size:
            stats = estimate_logf0_stats([frames.f0])
            mu_dist = abs(stats.mu - converter.tgt_logf0.mu)
            sigma_dist = abs(stats.sigma - converter.tgt_logf0.sigma)
        else:
            mu_dist = sigma_dist = float("nan")
        rows.append({
            "audio_path": entry.audio_path,
            "mcd_db": mcd,
            "logf0_mu_dist": mu_dist,
            "logf0_sigma_dist": sigma_dist,
            "duration_delta_frames": frames.n_frames - v.n_frames,
        })
    if not rows:
        raise InvalidInputError(
            f"no test utterances with source emotion {converter.source_emotion!r}"
        )
    keys = ("mcd_db", "logf0_mu_dist", "logf0_sigma_dist", "duration_delta_frames")
    aggregates = {
        k: float(np.nanmean([r[k] for r in rows])) for k in keys
    }
    aggregates["n_utterances"] = len(rows)
    return EvalReport(
        direction=converter.cfg.direction,
        speaker=converter.speaker,
        source_emotion=converter.source_emotion,
        target_emotion=converter.target_emotion,
        utterances=rows,
        aggregates=aggregates,
    )
