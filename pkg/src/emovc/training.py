"""Training loop: four-term objective, alternating updates, checkpoints.

Per iteration: one discriminator update on the cross-entropy real/fake
objective, then (depending on the iteration) one or two generator
updates minimizing the weighted sum of reconstruction, code-space
semi-cycle and adversarial terms, with the discriminators frozen. The
generator's adversarial term defaults to the non-saturating form
-log D(fake); the saturating +log(1 - D(fake)) variant is available via
`literal_generator_loss`.

Cross-domain translations use style codes encoded from the real
opposite-domain batch; per-domain running means of real style codes
(EMA) provide the inference-time domain styles.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .data import DomainCorpus, TrainingBatch, make_batch
from .errors import CheckpointError, ConfigurationError, InvalidInputError, ShapeError
from .nets import ConversionModel, ModelConfig

LOSS_LOG_HEADER = (
    "iteration,L_recon1,L_recon2,L_c1,L_c2,L_s1,L_s2,L_gan_d,L_gan_g,total,lr_g,lr_d"
)
PROB_CLAMP = 1e-7
CHECKPOINT_MAGIC = b"EMOVCKPT"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def reconstruction_loss(x: torch.Tensor, x_rec: torch.Tensor) -> torch.Tensor:
    """Mean absolute error."""
    if x.shape != x_rec.shape:
        raise ShapeError(f"shape mismatch {tuple(x.shape)} vs {tuple(x_rec.shape)}")
    return (x - x_rec).abs().mean()


def semi_cycle_losses(c_src, s_tgt, x_translated, content_encode, style_encode):
    """Code-space cycle terms: re-encode the translation in its new domain.

    Returns (content loss, style loss), both mean absolute errors against
    the codes that produced the translation.
    """
    l_c = reconstruction_loss(c_src, content_encode(x_translated))
    l_s = reconstruction_loss(s_tgt, style_encode(x_translated))
    return l_c, l_s


def _clamp_prob(p: torch.Tensor) -> torch.Tensor:
    return p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)


def discriminator_loss(p_real: torch.Tensor, p_fake: torch.Tensor) -> torch.Tensor:
    """-[log D(real) + log(1 - D(fake))], averaged."""
    return -(torch.log(_clamp_prob(p_real)).mean()
             + torch.log(1.0 - _clamp_prob(p_fake)).mean())


def generator_adversarial_loss(p_fake: torch.Tensor, literal: bool = False) -> torch.Tensor:
    """Non-saturating -log D(fake) by default; +log(1 - D(fake)) if literal."""
    p = _clamp_prob(p_fake)
    if literal:
        return torch.log(1.0 - p).mean()
    return -torch.log(p).mean()


def gan_losses(discriminator, x_real, x_fake, literal: bool = False):
    """Both adversarial objectives for one domain's critic."""
    l_d = discriminator_loss(discriminator(x_real), discriminator(x_fake.detach()))
    l_g = generator_adversarial_loss(discriminator(x_fake), literal)
    return l_d, l_g


@dataclass
class LossWeights:
    lambda_s: float = 1.0
    lambda_c: float = 1.0
    lambda_g: float = 1.0
    lambda_x: float = 10.0

    def __post_init__(self):
        if min(self.lambda_s, self.lambda_c, self.lambda_g, self.lambda_x) < 0:
            raise ConfigurationError("loss weights must be non-negative")


def total_loss(parts: dict, w: LossWeights):
    """Weighted sum over both directions.

    `parts` carries recon1/recon2, c1/c2, s1/s2 and gan1/gan2
    (generator-side adversarial terms).
    """
    return (
        w.lambda_s * (parts["s1"] + parts["s2"])
        + w.lambda_c * (parts["c1"] + parts["c2"])
        + w.lambda_x * (parts["recon1"] + parts["recon2"])
        + w.lambda_g * (parts["gan1"] + parts["gan2"])
    )


# ---------------------------------------------------------------------------
# schedule and style aggregation
# ---------------------------------------------------------------------------

@dataclass
class OptimizerSchedule:
    """Learning rates, decay onset and the generator:critic update ratio."""

    lr_g: float = 2e-4
    lr_d: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    total_iters: int = 200_000
    decay_start: int = 150_000
    ratio_switch_iter: int = 100_000
    gen_steps_early: int = 2
    gen_steps_late: int = 1

    def __post_init__(self):
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ConfigurationError("learning rates must be positive")
        if self.decay_start > self.total_iters:
            raise ConfigurationError(
                f"decay_start {self.decay_start} exceeds total_iters {self.total_iters}"
            )

    def lr_at(self, iteration: int) -> tuple[float, float]:
        """Constant before decay_start, then linear to 0 at total_iters."""
        if iteration < self.decay_start or self.total_iters == self.decay_start:
            factor = 1.0
        else:
            factor = max(
                0.0,
                (self.total_iters - iteration) / (self.total_iters - self.decay_start),
            )
        return self.lr_g * factor, self.lr_d * factor

    def gen_steps_at(self, iteration: int) -> int:
        return self.gen_steps_early if iteration < self.ratio_switch_iter else self.gen_steps_late


class DomainStyleState:
    """Per-domain running mean (EMA) of real-sample style codes."""

    def __init__(self, style_dim: int, decay: float = 0.999):
        self.decay = decay
        self.ema = [torch.zeros(style_dim), torch.zeros(style_dim)]
        self.counts = [0, 0]

    def update(self, domain: int, codes: torch.Tensor) -> None:
        codes = codes.detach().reshape(-1, self.ema[domain].shape[0])
        for code in codes:
            if self.counts[domain] == 0:
                self.ema[domain] = code.clone()
            else:
                self.ema[domain] = (
                    self.decay * self.ema[domain] + (1.0 - self.decay) * code
                )
            self.counts[domain] += 1

    def style(self, domain: int) -> torch.Tensor:
        # untrained state falls back to the neutral (zero) style
        return self.ema[domain].clone()

    def state_dict(self) -> dict:
        return {
            "decay": self.decay,
            "ema": [e.numpy().copy() for e in self.ema],
            "counts": list(self.counts),
        }

    @classmethod
    def from_state_dict(cls, doc: dict) -> "DomainStyleState":
        state = cls(style_dim=len(doc["ema"][0]), decay=doc["decay"])
        state.ema = [torch.as_tensor(np.asarray(e), dtype=torch.float32) for e in doc["ema"]]
        state.counts = list(doc["counts"])
        return state


def update_domain_style(state: DomainStyleState, domain: int, codes) -> DomainStyleState:
    state.update(domain, torch.as_tensor(np.asarray(codes), dtype=torch.float32))
    return state


# ---------------------------------------------------------------------------
# trainer
# ---------------------------------------------------------------------------

@dataclass
class LossReport:
    iteration: int
    recon1: float
    recon2: float
    c1: float
    c2: float
    s1: float
    s2: float
    gan_d: float
    gan_g: float
    lr_g: float
    lr_d: float

    @property
    def total(self) -> float:
        # recomputed in float64 from the reported parts so the logged
        # total is exactly their weighted sum
        w = self.weights
        return (
            w.lambda_s * (self.s1 + self.s2)
            + w.lambda_c * (self.c1 + self.c2)
            + w.lambda_x * (self.recon1 + self.recon2)
            + w.lambda_g * self.gan_g
        )

    weights: LossWeights = field(default_factory=LossWeights)

    def csv_row(self) -> str:
        vals = [
            self.recon1, self.recon2, self.c1, self.c2, self.s1, self.s2,
            self.gan_d, self.gan_g, self.total, self.lr_g, self.lr_d,
        ]
        return ",".join([str(self.iteration)] + [f"{v:.17g}" for v in vals])


class TrainingDiverged(InvalidInputError):
    """Raised when the periodic NaN/Inf guard trips."""


class Trainer:
    """Owns the model, both optimizers, RNG streams and the loss log."""

    def __init__(self, model: ConversionModel, weights: LossWeights | None = None,
                 schedule: OptimizerSchedule | None = None, *, seed: int = 0,
                 literal_generator_loss: bool = False, ema_decay: float = 0.999,
                 loss_log_path=None, nan_check_every: int = 100):
        self.model = model
        self.weights = weights or LossWeights()
        self.schedule = schedule or OptimizerSchedule()
        self.seed = seed
        self.literal_generator_loss = literal_generator_loss
        self.opt_g = torch.optim.Adam(
            list(model.generator_parameters()),
            lr=self.schedule.lr_g, betas=(self.schedule.beta1, self.schedule.beta2),
        )
        self.opt_d = torch.optim.Adam(
            list(model.discriminator_parameters()),
            lr=self.schedule.lr_d, betas=(self.schedule.beta1, self.schedule.beta2),
        )
        self.style_state = DomainStyleState(model.cfg.style_dim, ema_decay)
        self.iteration = 0
        self.gen_update_count = 0
        self.rng = np.random.default_rng(seed)
        self.nan_check_every = nan_check_every
        self.loss_log_path = loss_log_path
        self._log_fh = None
        if loss_log_path is not None:
            self._open_log()

    def _open_log(self):
        fresh = not (os.path.exists(self.loss_log_path)
                     and os.path.getsize(self.loss_log_path) > 0)
        self._log_fh = open(self.loss_log_path, "a", encoding="utf-8")
        if fresh:
            self._log_fh.write(LOSS_LOG_HEADER + "\n")
            self._log_fh.flush()

    def close(self):
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    def _set_lr(self, lr_g: float, lr_d: float):
        for group in self.opt_g.param_groups:
            group["lr"] = lr_g
        for group in self.opt_d.param_groups:
            group["lr"] = lr_d

    def train_step(self, batch: TrainingBatch) -> LossReport:
        m = self.model
        x1 = torch.as_tensor(np.asarray(batch.x1), dtype=torch.float32)
        x2 = torch.as_tensor(np.asarray(batch.x2), dtype=torch.float32)
        it = self.iteration
        lr_g, lr_d = self.schedule.lr_at(it)
        self._set_lr(lr_g, lr_d)

        # ---- critic update (generators frozen via no_grad fakes) ----
        with torch.no_grad():
            c1 = m.content_encode(0, x1)
            c2 = m.content_encode(1, x2)
            s1 = m.style_encode(0, x1)
            s2 = m.style_encode(1, x2)
            x12 = m.decode(0, c2, s1)      # into domain 1
            x21 = m.decode(1, c1, s2)      # into domain 2
        l_d1 = discriminator_loss(m.discriminate(0, x1), m.discriminate(0, x12))
        l_d2 = discriminator_loss(m.discriminate(1, x2), m.discriminate(1, x21))
        l_d = l_d1 + l_d2
        self.opt_d.zero_grad(set_to_none=True)
        l_d.backward()
        self.opt_d.step()

        # ---- generator updates, critics frozen ----
        for p in m.discriminator_parameters():
            p.requires_grad_(False)
        report = None
        real_s1 = real_s2 = None
        try:
            for sub in range(self.schedule.gen_steps_at(it)):
                c1 = m.content_encode(0, x1)
                c2 = m.content_encode(1, x2)
                s1 = m.style_encode(0, x1)
                s2 = m.style_encode(1, x2)
                l_rec1 = reconstruction_loss(x1, m.decode(0, c1, s1))
                l_rec2 = reconstruction_loss(x2, m.decode(1, c2, s2))
                x21 = m.decode(1, c1, s2)
                x12 = m.decode(0, c2, s1)
                l_c1, l_s2 = semi_cycle_losses(
                    c1, s2, x21,
                    lambda x: m.content_encode(1, x), lambda x: m.style_encode(1, x),
                )
                l_c2, l_s1 = semi_cycle_losses(
                    c2, s1, x12,
                    lambda x: m.content_encode(0, x), lambda x: m.style_encode(0, x),
                )
                l_gan1 = generator_adversarial_loss(
                    m.discriminate(0, x12), self.literal_generator_loss
                )
                l_gan2 = generator_adversarial_loss(
                    m.discriminate(1, x21), self.literal_generator_loss
                )
                objective = total_loss(
                    {"recon1": l_rec1, "recon2": l_rec2, "c1": l_c1, "c2": l_c2,
                     "s1": l_s1, "s2": l_s2, "gan1": l_gan1, "gan2": l_gan2},
                    self.weights,
                )
                self.opt_g.zero_grad(set_to_none=True)
                objective.backward()
                self.opt_g.step()
                self.gen_update_count += 1
                if sub == 0:
                    real_s1 = s1.detach()
                    real_s2 = s2.detach()
                    report = LossReport(
                        iteration=it + 1,
                        recon1=l_rec1.item(), recon2=l_rec2.item(),
                        c1=l_c1.item(), c2=l_c2.item(),
                        s1=l_s1.item(), s2=l_s2.item(),
                        gan_d=l_d.item(),
                        gan_g=l_gan1.item() + l_gan2.item(),
                        lr_g=lr_g, lr_d=lr_d,
                        weights=self.weights,
                    )
        finally:
            for p in m.discriminator_parameters():
                p.requires_grad_(True)

        self.style_state.update(0, real_s1)
        self.style_state.update(1, real_s2)
        self.iteration = it + 1

        if self.iteration % self.nan_check_every == 0:
            values = [report.recon1, report.recon2, report.c1, report.c2,
                      report.s1, report.s2, report.gan_d, report.gan_g]
            if not all(np.isfinite(values)):
                raise TrainingDiverged(
                    f"non-finite loss at iteration {self.iteration}: {report.csv_row()}"
                )

        if self._log_fh is not None:
            self._log_fh.write(report.csv_row() + "\n")
            self._log_fh.flush()
        return report

    def fit(self, corpus1: DomainCorpus, corpus2: DomainCorpus, *,
            batch_size: int = 8, n_iters: int | None = None,
            checkpoint_path=None, checkpoint_every: int | None = None,
            extra_config: dict | None = None, progress_every: int = 0):
        """Run up to `total_iters` (or `n_iters` more steps from here)."""
        if n_iters is None:
            n_iters = self.schedule.total_iters - self.iteration
        report = None
        for k in range(n_iters):
            batch = make_batch(corpus1, corpus2, batch_size, self.rng)
            report = self.train_step(batch)
            if progress_every and (k + 1) % progress_every == 0:
                print(f"iter {report.iteration}: total {report.total:.4f}")
            if (checkpoint_path and checkpoint_every
                    and self.iteration % checkpoint_every == 0):
                save_checkpoint(self, checkpoint_path, extra_config)
        if checkpoint_path:
            save_checkpoint(self, checkpoint_path, extra_config)
        return report

    # ---- full state for checkpointing ----

    def config_dict(self, extra_config: dict | None = None) -> dict:
        return {
            "model": self.model.cfg.to_dict(),
            "weights": asdict(self.weights),
            "schedule": asdict(self.schedule),
            "seed": self.seed,
            "literal_generator_loss": self.literal_generator_loss,
            "extra": extra_config or {},
        }


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def save_checkpoint(trainer: Trainer, path, extra_config: dict | None = None) -> None:
    """Atomic write of the versioned container (magic, version, payload)."""
    config = trainer.config_dict(extra_config)
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": config,
        "config_hash": config_hash(config),
        "iteration": trainer.iteration,
        "gen_update_count": trainer.gen_update_count,
        "nets": trainer.model.state_dict(),
        "opt_g": trainer.opt_g.state_dict(),
        "opt_d": trainer.opt_d.state_dict(),
        "style_state": trainer.style_state.state_dict(),
        "torch_rng": torch.get_rng_state(),
        "numpy_rng": trainer.rng.bit_generator.state,
    }
    path = str(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", CHECKPOINT_VERSION))
            torch.save(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> dict:
    """Read and validate the container; returns the raw payload."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported checkpoint version {version},"
                f" this build reads version {CHECKPOINT_VERSION}"
            )
        try:
            payload = torch.load(fh, weights_only=False)
        except Exception as exc:
            raise CheckpointError(f"{path}: corrupt checkpoint payload: {exc}") from exc
    if payload.get("format_version") != version:
        raise CheckpointError(f"{path}: header/payload version mismatch")
    if config_hash(payload["config"]) != payload["config_hash"]:
        raise CheckpointError(f"{path}: config hash does not match stored config")
    return payload


def trainer_from_checkpoint(payload: dict, *, loss_log_path=None) -> Trainer:
    """Rebuild a trainer that continues exactly where the payload stopped."""
    config = payload["config"]
    model = ConversionModel(ModelConfig.from_dict(config["model"]))
    model.load_state_dict(payload["nets"])
    trainer = Trainer(
        model,
        LossWeights(**config["weights"]),
        OptimizerSchedule(**config["schedule"]),
        seed=config["seed"],
        literal_generator_loss=config["literal_generator_loss"],
        ema_decay=payload["style_state"]["decay"],
        loss_log_path=loss_log_path,
    )
    trainer.opt_g.load_state_dict(payload["opt_g"])
    trainer.opt_d.load_state_dict(payload["opt_d"])
    trainer.style_state = DomainStyleState.from_state_dict(payload["style_state"])
    trainer.iteration = payload["iteration"]
    trainer.gen_update_count = payload.get("gen_update_count", 0)
    trainer.rng.bit_generator.state = payload["numpy_rng"]
    torch.set_rng_state(payload["torch_rng"])
    return trainer


def check_config_hash(payload: dict, current_config: dict) -> str | None:
    """Warning text when a checkpoint was produced under another config."""
    current = config_hash(current_config)
    if current != payload["config_hash"]:
        return (
            f"config hash mismatch: checkpoint {payload['config_hash'][:12]}..,"
            f" current {current[:12]}.. (training will follow the checkpoint)"
        )
    return None
