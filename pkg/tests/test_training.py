import math

import numpy as np
import pytest
import torch

from emovc.data import TrainingBatch, build_corpus, make_batch
from emovc.errors import CheckpointError, ConfigurationError, ShapeError
from emovc.mcep import mcep_stats
from emovc.nets import ConversionModel, ModelConfig
from emovc.training import (
    CHECKPOINT_MAGIC, LOSS_LOG_HEADER, DomainStyleState, LossWeights,
    OptimizerSchedule, Trainer, TrainingDiverged, check_config_hash,
    gan_losses, generator_adversarial_loss, load_checkpoint,
    reconstruction_loss, save_checkpoint, semi_cycle_losses, total_loss,
    trainer_from_checkpoint, update_domain_style,
)

TINY = ModelConfig.scaled(32)


def tiny_trainer(seed=0, **kwargs):
    torch.manual_seed(seed)
    model = ConversionModel(TINY)
    schedule = kwargs.pop("schedule", None) or OptimizerSchedule(
        total_iters=2000, decay_start=1500, ratio_switch_iter=1000
    )
    return Trainer(model, schedule=schedule, seed=seed, **kwargs)


def random_batch(seed=0, batch=2):
    rng = np.random.default_rng(seed)
    return TrainingBatch(
        rng.standard_normal((batch, 24, 128)), rng.standard_normal((batch, 24, 128))
    )


# ---------------- loss terms ----------------

def test_reconstruction_loss_values():
    x = torch.zeros(2, 3, 4)
    assert reconstruction_loss(x, x).item() == 0.0
    assert reconstruction_loss(x, torch.ones_like(x)).item() == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((5, 7)), rng.standard_normal((5, 7))
    got = reconstruction_loss(torch.as_tensor(a), torch.as_tensor(b)).item()
    assert got == pytest.approx(np.abs(a - b).mean(), rel=1e-6)
    with pytest.raises(ShapeError):
        reconstruction_loss(torch.zeros(2, 3), torch.zeros(3, 2))


def test_semi_cycle_zero_for_perfect_inverse():
    # encoders that exactly recover the codes that built the translation
    c_src = torch.randn(1, 4, 8)
    s_tgt = torch.randn(1, 16)
    x_translated = torch.randn(1, 24, 32)
    l_c, l_s = semi_cycle_losses(
        c_src, s_tgt, x_translated,
        content_encode=lambda x: c_src.clone(),
        style_encode=lambda x: s_tgt.clone(),
    )
    assert l_c.item() == 0.0
    assert l_s.item() == 0.0


def test_semi_cycle_matches_l1_oracle():
    rng = np.random.default_rng(1)
    c_src = torch.as_tensor(rng.standard_normal((1, 4, 8)))
    s_tgt = torch.as_tensor(rng.standard_normal((1, 16)))
    c_back = torch.as_tensor(rng.standard_normal((1, 4, 8)))
    s_back = torch.as_tensor(rng.standard_normal((1, 16)))
    l_c, l_s = semi_cycle_losses(
        c_src, s_tgt, torch.zeros(1, 24, 32),
        content_encode=lambda x: c_back, style_encode=lambda x: s_back,
    )
    assert l_c.item() == pytest.approx(np.abs((c_src - c_back).numpy()).mean())
    assert l_s.item() == pytest.approx(np.abs((s_tgt - s_back).numpy()).mean())


def test_semi_cycle_gradient_matches_finite_differences():
    # toy two-channel network pair in float64
    cfg = ModelConfig(
        mcep_dim=4, crop_len=32, base_channels=2, content_channels=2,
        style_dim=2, n_res_blocks=1, n_adain_blocks=1, mlp_hidden=4,
        disc_channels=(2, 2, 2, 2),
    )
    torch.manual_seed(3)
    model = ConversionModel(cfg).double()
    x1 = torch.randn(1, 4, 32, dtype=torch.float64)
    x2 = torch.randn(1, 4, 32, dtype=torch.float64)

    def content_cycle_loss():
        c1 = model.content_encode(0, x1)
        s2 = model.style_encode(1, x2)
        x21 = model.decode(1, c1, s2)
        l_c, _ = semi_cycle_losses(
            c1, s2, x21,
            content_encode=lambda x: model.content_encode(1, x),
            style_encode=lambda x: model.style_encode(1, x),
        )
        return l_c

    param = model.decoders[1].head.conv.weight
    loss = content_cycle_loss()
    (grad,) = torch.autograd.grad(loss, param)
    # probe the largest-gradient entries against central differences
    flat = grad.flatten()
    order = torch.argsort(flat.abs(), descending=True)[:3]
    eps = 1e-5
    for idx in order:
        i = int(idx)
        with torch.no_grad():
            orig = param.flatten()[i].item()
            param.flatten()[i] = orig + eps
            up = content_cycle_loss().item()
            param.flatten()[i] = orig - eps
            down = content_cycle_loss().item()
            param.flatten()[i] = orig
        fd = (up - down) / (2 * eps)
        assert fd == pytest.approx(flat[i].item(), rel=1e-3, abs=1e-9)


def test_gan_losses_uninformative_critic():
    l_d, l_g = gan_losses(lambda x: torch.full((x.shape[0],), 0.5), torch.zeros(4, 1),
                          torch.zeros(4, 1))
    assert l_d.item() == pytest.approx(2 * math.log(2), rel=1e-6)
    assert l_g.item() == pytest.approx(math.log(2), rel=1e-6)


def test_gan_losses_perfect_critic():
    calls = {"n": 0}

    def perfect(x):
        calls["n"] += 1
        # real first, then fake twice in gan_losses' calling order
        return torch.ones(x.shape[0]) if calls["n"] == 1 else torch.zeros(x.shape[0])

    l_d, l_g = gan_losses(perfect, torch.zeros(3, 1), torch.zeros(3, 1))
    assert l_d.item() == pytest.approx(0.0, abs=1e-5)
    assert np.isfinite(l_g.item())  # clamped, not -inf


def test_gan_losses_clamped_at_saturation():
    l_d, l_g = gan_losses(lambda x: torch.zeros(x.shape[0]), torch.zeros(2, 1),
                          torch.zeros(2, 1))
    assert np.isfinite(l_d.item()) and np.isfinite(l_g.item())


def test_generator_literal_form():
    p = torch.tensor([0.5, 0.5])
    assert generator_adversarial_loss(p, literal=True).item() == pytest.approx(
        -math.log(2), rel=1e-6
    )


def test_total_loss_arithmetic():
    ones = {k: 1.0 for k in ("recon1", "recon2", "c1", "c2", "s1", "s2", "gan1", "gan2")}
    assert total_loss(ones, LossWeights()) == pytest.approx(26.0)
    zero_w = LossWeights(0.0, 0.0, 0.0, 0.0)
    assert total_loss(ones, zero_w) == 0.0
    base = total_loss(ones, LossWeights())
    doubled = total_loss(ones, LossWeights(lambda_x=20.0))
    assert doubled - base == pytest.approx(10.0 * (ones["recon1"] + ones["recon2"]))


def test_negative_weights_rejected():
    with pytest.raises(ConfigurationError):
        LossWeights(lambda_s=-1.0)


# ---------------- schedule ----------------

def test_lr_schedule_piecewise():
    sched = OptimizerSchedule(total_iters=2000, decay_start=1500,
                              ratio_switch_iter=1000)
    for it in (0, 100, 1499):
        assert sched.lr_at(it) == (2e-4, 1e-4)
    lr_g, lr_d = sched.lr_at(1750)
    assert lr_g == pytest.approx(2e-4 * 0.5)
    assert lr_d == pytest.approx(1e-4 * 0.5)
    assert sched.lr_at(2000) == (0.0, 0.0)


def test_gen_step_ratio_switch():
    sched = OptimizerSchedule(total_iters=2000, decay_start=1500,
                              ratio_switch_iter=1000)
    assert sched.gen_steps_at(0) == 2
    assert sched.gen_steps_at(999) == 2
    assert sched.gen_steps_at(1000) == 1
    assert sched.gen_steps_at(1999) == 1


def test_default_hyperparameters():
    sched = OptimizerSchedule()
    assert (sched.lr_g, sched.lr_d) == (2e-4, 1e-4)
    assert (sched.beta1, sched.beta2) == (0.5, 0.999)
    assert sched.decay_start == 150_000
    assert sched.ratio_switch_iter == 100_000
    assert sched.gen_steps_at(99_999) == 2
    assert sched.gen_steps_at(100_000) == 1
    w = LossWeights()
    assert (w.lambda_s, w.lambda_c, w.lambda_g, w.lambda_x) == (1.0, 1.0, 1.0, 10.0)


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        OptimizerSchedule(total_iters=100, decay_start=200)
    with pytest.raises(ConfigurationError):
        OptimizerSchedule(lr_g=0.0)


# ---------------- style aggregation ----------------

def test_style_ema_first_observation():
    state = DomainStyleState(4)
    s = torch.tensor([1.0, 2.0, 3.0, 4.0])
    state.update(0, s)
    assert torch.equal(state.style(0), s)
    assert state.counts == [1, 0]


def test_style_ema_constant_stream_fixed_point():
    state = DomainStyleState(4)
    s = torch.tensor([1.0, -1.0, 0.5, 2.0])
    for _ in range(50):
        state.update(1, s)
    np.testing.assert_allclose(state.style(1).numpy(), s.numpy(), atol=1e-6)


def test_style_ema_alternating_stream_decays():
    state = DomainStyleState(2, decay=0.999)
    v = torch.tensor([1.0, -2.0])
    norms = []
    for k in range(12000):
        state.update(0, v if k % 2 == 0 else -v)
        norms.append(float(state.style(0).norm()))
    v_norm = float(v.norm())
    assert max(norms) <= v_norm + 1e-6
    # transient decays at rate d per step toward the tiny alternating
    # cycle around 0 whose magnitude is |v| (1-d)/(1+d)
    assert norms[-1] < 0.01 * v_norm
    assert norms[-1] == pytest.approx(v_norm * (1 - 0.999) / (1 + 0.999), rel=0.3)


def test_update_domain_style_function():
    state = DomainStyleState(3)
    update_domain_style(state, 1, np.ones((2, 3)))
    assert state.counts[1] == 2


def test_untrained_style_is_neutral():
    state = DomainStyleState(5)
    assert torch.equal(state.style(0), torch.zeros(5))


# ---------------- train_step behaviour ----------------

def test_train_step_deterministic():
    batch = random_batch(7)
    t1 = tiny_trainer(seed=11)
    t2 = tiny_trainer(seed=11)
    r1 = t1.train_step(batch)
    r2 = t2.train_step(batch)
    assert r1.csv_row() == r2.csv_row()
    for p1, p2 in zip(t1.model.parameters(), t2.model.parameters()):
        assert torch.equal(p1, p2)


def _max_delta(before, params):
    return max((a - b).abs().max().item() for a, b in zip(before, params))


def test_update_partition():
    batch = random_batch(8)
    # with one side's rate at 1e-30, any real cross-talk from the other
    # optimizer (scale ~1e-4) would show up many orders above the floor
    trainer = tiny_trainer(seed=1, schedule=OptimizerSchedule(
        lr_g=1e-30, lr_d=1e-4, total_iters=10, decay_start=10, ratio_switch_iter=5))
    gen_before = [p.clone() for p in trainer.model.generator_parameters()]
    disc_before = [p.clone() for p in trainer.model.discriminator_parameters()]
    trainer.train_step(batch)
    assert _max_delta(gen_before, trainer.model.generator_parameters()) < 1e-20
    assert _max_delta(disc_before, trainer.model.discriminator_parameters()) > 1e-8

    trainer = tiny_trainer(seed=1, schedule=OptimizerSchedule(
        lr_g=2e-4, lr_d=1e-30, total_iters=10, decay_start=10, ratio_switch_iter=5))
    disc_before = [p.clone() for p in trainer.model.discriminator_parameters()]
    gen_before = [p.clone() for p in trainer.model.generator_parameters()]
    trainer.train_step(batch)
    assert _max_delta(disc_before, trainer.model.discriminator_parameters()) < 1e-20
    assert _max_delta(gen_before, trainer.model.generator_parameters()) > 1e-8


def test_gen_steps_follow_ratio():
    batch = random_batch(3)
    trainer = tiny_trainer(seed=2, schedule=OptimizerSchedule(
        total_iters=10, decay_start=10, ratio_switch_iter=2))
    for _ in range(4):
        trainer.train_step(batch)
    #两 iterations at 2 gen steps, two at 1
    assert trainer.gen_update_count == 2 * 2 + 2 * 1


def test_loss_report_total_is_weighted_sum():
    trainer = tiny_trainer(seed=3)
    report = trainer.train_step(random_batch(1))
    recomputed = (
        trainer.weights.lambda_s * (report.s1 + report.s2)
        + trainer.weights.lambda_c * (report.c1 + report.c2)
        + trainer.weights.lambda_x * (report.recon1 + report.recon2)
        + trainer.weights.lambda_g * report.gan_g
    )
    assert abs(report.total - recomputed) <= 1e-9
    assert min(report.recon1, report.recon2, report.c1, report.c2,
               report.s1, report.s2, report.gan_d, report.gan_g) >= 0.0


def test_nan_guard_aborts():
    trainer = tiny_trainer(seed=4, nan_check_every=1)
    with torch.no_grad():
        trainer.model.decoders[0].head.conv.weight[0, 0, 0] = float("nan")
    with pytest.raises(TrainingDiverged):
        trainer.train_step(random_batch(5))


def test_overfit_single_utterance_without_gan(toy_records):
    # reconstruction-only smoke: loss halves from its iteration-10 value
    records = [r for r in toy_records if r.emotion == "neu"][:1] + \
              [r for r in toy_records if r.emotion == "ang"][:1]
    stats = mcep_stats(r.mcep_seq() for r in records)
    c1 = build_corpus(records, "spk1", "neu", stats)
    c2 = build_corpus(records, "spk1", "ang", stats)
    torch.manual_seed(5)
    model = ConversionModel(TINY)
    trainer = Trainer(
        model, LossWeights(lambda_g=0.0),
        OptimizerSchedule(total_iters=500, decay_start=500, ratio_switch_iter=250),
        seed=5,
    )
    recon = []
    for _ in range(300):
        report = trainer.train_step(make_batch(c1, c2, 2, trainer.rng))
        recon.append(report.recon1 + report.recon2)
    assert np.mean(recon[-10:]) <= 0.5 * recon[9]


# ---------------- checkpointing ----------------

def test_checkpoint_roundtrip_trajectory(tmp_path):
    batch = random_batch(6)
    reference = tiny_trainer(seed=21)
    rows_ref = []
    for _ in range(5):
        rows_ref.append(reference.train_step(batch).csv_row())

    trainer = tiny_trainer(seed=21)
    for _ in range(3):
        trainer.train_step(batch)
    path = tmp_path / "mid.ckpt"
    save_checkpoint(trainer, path)
    resumed = trainer_from_checkpoint(load_checkpoint(path))
    rows_resumed = [resumed.train_step(batch).csv_row() for _ in range(2)]
    assert rows_resumed == rows_ref[3:]


def test_checkpoint_magic_and_version(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)

    versioned = tmp_path / "vers.ckpt"
    versioned.write_bytes(CHECKPOINT_MAGIC + (99).to_bytes(4, "little") + b"\x00" * 8)
    with pytest.raises(CheckpointError):
        load_checkpoint(versioned)


def test_checkpoint_corrupt_payload(tmp_path):
    path = tmp_path / "corrupt.ckpt"
    path.write_bytes(CHECKPOINT_MAGIC + (1).to_bytes(4, "little") + b"garbage")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_config_hash_warning(tmp_path):
    trainer = tiny_trainer(seed=22)
    path = tmp_path / "t.ckpt"
    save_checkpoint(trainer, path, extra_config={"speaker": "spk1"})
    payload = load_checkpoint(path)
    assert check_config_hash(payload, trainer.config_dict({"speaker": "spk1"})) is None
    warning = check_config_hash(payload, trainer.config_dict({"speaker": "other"}))
    assert warning is not None and "mismatch" in warning


def test_checkpoint_persists_style_state(tmp_path):
    trainer = tiny_trainer(seed=23)
    trainer.train_step(random_batch(2))
    path = tmp_path / "s.ckpt"
    save_checkpoint(trainer, path)
    resumed = trainer_from_checkpoint(load_checkpoint(path))
    for d in (0, 1):
        assert torch.equal(resumed.style_state.style(d), trainer.style_state.style(d))
        assert resumed.style_state.counts[d] == trainer.style_state.counts[d]
    assert resumed.iteration == trainer.iteration
    assert resumed.gen_update_count == trainer.gen_update_count


def test_loss_log_format(tmp_path):
    log = tmp_path / "loss.csv"
    trainer = tiny_trainer(seed=24, loss_log_path=log)
    trainer.train_step(random_batch(2))
    trainer.train_step(random_batch(2))
    trainer.close()
    lines = log.read_text().splitlines()
    assert lines[0] == LOSS_LOG_HEADER
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "1"
    assert len(first) == 12
