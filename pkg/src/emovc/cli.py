"""Command-line surface: features, stats, train, convert, eval.

Exit codes: 0 success, 1 user error (bad flags, bad files), 2 internal
error. Every subcommand accepts --seed.
"""

from __future__ import annotations

import argparse
import sys
import traceback
import warnings
from pathlib import Path

from . import cache, mcep, vocoder
from .audio import read_wav, write_wav
from .config import TrainRunConfig, parse_train_config
from .data import build_corpus, load_manifest, split_train_test
from .errors import EmovcError, InvalidInputError, UsageError
from .mcep import load_mcep_stats, mcep_stats, save_mcep_stats
from .pipeline import (
    ConversionConfig, Converter, evaluate, logf0_stats_path, mcep_stats_path,
)
from .prosody import estimate_logf0_stats, save_logf0_stats


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _resolve_audio(entry, manifest_path, audio_root):
    path = Path(entry.audio_path)
    if path.is_absolute():
        return path
    root = Path(audio_root) if audio_root else Path(manifest_path).parent
    return root / path


def _load_records(entries, features_dir):
    records = []
    for entry in entries:
        path = cache.cache_path(features_dir, entry.audio_path)
        if not path.exists():
            raise InvalidInputError(
                f"missing cached features for {entry.audio_path!r} (expected {path});"
                " run the 'features' command first"
            )
        records.append(cache.read_features(path))
    return records


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_features(args) -> int:
    entries = load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for entry in entries:
        wav_path = _resolve_audio(entry, args.manifest, args.audio_root)
        w = read_wav(wav_path)
        frames = vocoder.analyze(w, backend=args.backend)
        coeffs = mcep.sp_to_mcep(frames.sp, order=args.order)
        if not args.no_vad:
            coeffs, frames = mcep.energy_vad(coeffs, frames, args.vad_threshold)
        rec = cache.FeatureRecord(
            speaker=entry.speaker, emotion=entry.emotion, session=entry.session,
            f0=frames.f0, mcep=coeffs.coeffs, ap=frames.ap,
            frame_period_ms=frames.frame_period_ms,
            sample_rate=frames.sample_rate,
            fft_size=frames.fft_size, alpha=coeffs.alpha,
        )
        target = cache.cache_path(out_dir, entry.audio_path)
        cache.write_features(target, rec)
        print(f"features: {entry.audio_path} -> {target} ({rec.n_frames} frames)")
    return 0


def cmd_stats(args) -> int:
    entries = load_manifest(args.manifest)
    train_entries, _ = split_train_test(entries, ratio=args.ratio, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    by_speaker: dict[str, list] = {}
    for entry in train_entries:
        by_speaker.setdefault(entry.speaker, []).append(entry)
    for speaker, speaker_entries in sorted(by_speaker.items()):
        records = _load_records(speaker_entries, args.features_dir)
        stats = mcep_stats(r.mcep_seq() for r in records)
        path = mcep_stats_path(out_dir, speaker)
        save_mcep_stats(stats, path, speaker=speaker)
        print(f"stats: {path} ({len(records)} train utterances, pooled)")
        by_emotion: dict[str, list] = {}
        for rec in records:
            by_emotion.setdefault(rec.emotion, []).append(rec)
        for emotion, recs in sorted(by_emotion.items()):
            logf0 = estimate_logf0_stats(
                (r.f0 for r in recs), speaker=speaker, emotion=emotion
            )
            path = logf0_stats_path(out_dir, speaker, emotion)
            save_logf0_stats(logf0, path)
            print(
                f"stats: {path} (mu={logf0.mu:.4f}, sigma={logf0.sigma:.4f},"
                f" {logf0.n_frames} voiced frames)"
            )
    return 0


def cmd_train(args) -> int:
    import torch

    from .nets import ConversionModel, ModelConfig
    from .training import (
        LossWeights, OptimizerSchedule, Trainer, check_config_hash,
        load_checkpoint, trainer_from_checkpoint,
    )

    torch.set_num_threads(args.threads)
    cfg: TrainRunConfig = parse_train_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    entries = load_manifest(args.manifest)
    train_entries, _ = split_train_test(entries, ratio=args.ratio, seed=cfg.seed)
    records = _load_records(
        [e for e in train_entries
         if e.speaker == cfg.speaker and e.emotion in (cfg.emotion_1, cfg.emotion_2)],
        cfg.features_dir,
    )
    speaker_stats = load_mcep_stats(mcep_stats_path(cfg.stats_dir, cfg.speaker))
    corpus1 = build_corpus(records, cfg.speaker, cfg.emotion_1, speaker_stats)
    corpus2 = build_corpus(records, cfg.speaker, cfg.emotion_2, speaker_stats)
    print(f"train: domain 1 ({cfg.emotion_1}) {len(corpus1)} utterances,"
          f" domain 2 ({cfg.emotion_2}) {len(corpus2)} utterances")

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loss_log = out_dir / "loss_log.csv"
    ckpt_path = out_dir / "model.ckpt"
    weights = LossWeights(cfg.lambda_s, cfg.lambda_c, cfg.lambda_g, cfg.lambda_x)
    schedule = OptimizerSchedule(
        lr_g=cfg.lr_g, lr_d=cfg.lr_d, total_iters=cfg.total_iters,
        decay_start=cfg.decay_start, ratio_switch_iter=cfg.ratio_switch_iter,
    )
    extra = {"speaker": cfg.speaker, "emotion_1": cfg.emotion_1,
             "emotion_2": cfg.emotion_2}

    if args.resume:
        from dataclasses import asdict

        payload = load_checkpoint(args.resume)
        trainer = trainer_from_checkpoint(payload, loss_log_path=loss_log)
        current = {
            "model": trainer.model.cfg.to_dict(),
            "weights": asdict(weights),
            "schedule": asdict(schedule),
            "seed": cfg.seed,
            "literal_generator_loss": trainer.literal_generator_loss,
            "extra": extra,
        }
        warning = check_config_hash(payload, current)
        if warning:
            warnings.warn(warning)
            print(f"warning: {warning}")
        print(f"train: resumed at iteration {trainer.iteration}")
    else:
        torch.manual_seed(cfg.seed)
        model_cfg = (ModelConfig.scaled(cfg.model_width_divisor)
                     if cfg.model_width_divisor > 1 else ModelConfig())
        model = ConversionModel(model_cfg)
        trainer = Trainer(model, weights, schedule, seed=cfg.seed,
                          loss_log_path=loss_log)

    remaining = trainer.schedule.total_iters - trainer.iteration
    n_iters = remaining if args.max_iters is None else min(remaining, args.max_iters)
    report = trainer.fit(
        corpus1, corpus2, batch_size=cfg.batch_size, n_iters=n_iters,
        checkpoint_path=ckpt_path, checkpoint_every=args.checkpoint_every,
        extra_config=extra, progress_every=args.progress_every,
    )
    trainer.close()
    if report is not None:
        print(f"train: finished at iteration {report.iteration},"
              f" total loss {report.total:.4f}")
    print(f"train: checkpoint {ckpt_path}, loss log {loss_log}")
    return 0


def cmd_convert(args) -> int:
    import torch

    torch.set_num_threads(args.threads)
    cfg = ConversionConfig(
        direction=args.direction,
        stats_dir=args.stats_dir,
        checkpoint=args.checkpoint,
        speaker=args.speaker or "",
        source_emotion=args.source_emotion or "",
        target_emotion=args.target_emotion or "",
        f0_only=args.f0_only,
        backend=args.backend,
    )
    converter = Converter(cfg)
    w = read_wav(args.input)
    out = converter.convert_utterance(w)
    write_wav(args.out, out)
    print(f"convert: {args.input} [{converter.source_emotion}] ->"
          f" {args.out} [{converter.target_emotion}]"
          f" ({out.samples.size / out.sample_rate:.2f} s)")
    return 0


def cmd_eval(args) -> int:
    import torch

    torch.set_num_threads(args.threads)
    entries = load_manifest(args.manifest)
    _, test_entries = split_train_test(entries, ratio=args.ratio, seed=args.seed)
    cfg = ConversionConfig(
        direction=args.direction,
        stats_dir=args.stats_dir,
        checkpoint=args.checkpoint,
        f0_only=args.f0_only,
        backend=args.backend,
    )
    converter = Converter(cfg)
    audio_root = args.audio_root or Path(args.manifest).parent
    report = evaluate(test_entries, converter, audio_root=audio_root)
    report.save(args.out)
    agg = report.aggregates
    print(f"eval: {agg['n_utterances']} utterances,"
          f" recon MCD {agg['mcd_db']:.3f} dB,"
          f" |d mu| {agg['logf0_mu_dist']:.4f},"
          f" |d sigma| {agg['logf0_sigma_dist']:.4f}")
    print(f"eval: report written to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emovc", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=None,
                       help="seed for any randomized step")
        return p

    p = add("features", cmd_features, "extract and cache vocoder features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="cache directory")
    p.add_argument("--audio-root", default=None)
    p.add_argument("--order", type=int, default=mcep.DEFAULT_ORDER)
    p.add_argument("--vad-threshold", type=float, default=mcep.VAD_THRESHOLD_DB)
    p.add_argument("--no-vad", action="store_true")
    p.add_argument("--backend", default=None)

    p = add("stats", cmd_stats, "compute normalization and log-F0 statistics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--out", required=True, help="stats directory")
    p.add_argument("--ratio", type=float, default=0.8)

    p = add("train", cmd_train, "train a two-domain conversion model")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--max-iters", type=int, default=None,
                   help="stop after this many iterations in this invocation")
    p.add_argument("--checkpoint-every", type=int, default=None)
    p.add_argument("--progress-every", type=int, default=200)
    p.add_argument("--threads", type=int, default=1)

    p = add("convert", cmd_convert, "convert one utterance")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--direction", required=True, choices=("1to2", "2to1"))
    p.add_argument("--stats-dir", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--f0-only", action="store_true")
    p.add_argument("--speaker", default=None)
    p.add_argument("--source-emotion", default=None)
    p.add_argument("--target-emotion", default=None)
    p.add_argument("--backend", default=None)
    p.add_argument("--threads", type=int, default=1)

    p = add("eval", cmd_eval, "objective evaluation on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--direction", required=True, choices=("1to2", "2to1"))
    p.add_argument("--stats-dir", required=True)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--audio-root", default=None)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--f0-only", action="store_true")
    p.add_argument("--backend", default=None)
    p.add_argument("--threads", type=int, default=1)

    return parser


def cli_main(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        if getattr(args, "seed", None) is None:
            args.seed = 0 if args.command != "train" else None
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:       # argparse --help
        code = exc.code
        return int(code) if isinstance(code, int) else 0
    except (EmovcError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
