"""Networks: content encoder, style encoder, style-driven decoder, 2D critic.

All 1-D convolutions are gated: a layer specified with F filters produces
2F pre-activation channels which are split in half and combined as
A * sigmoid(B), so F counts post-gating channels. Stride-s convolutions
use "same"-style zero padding (output length = ceil(T / s)).

The decoder injects emotion through adaptive instance normalization in
its residual blocks: each block re-standardizes channels and applies a
style-supplied per-channel mean and scale produced by a small MLP from
the 16-dim style code.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigurationError, ShapeError


# ---------------------------------------------------------------------------
# functional layer primitives
# ---------------------------------------------------------------------------

def glu(x: torch.Tensor, dim: int = -2) -> torch.Tensor:
    """Gated linear unit: split channels in half, A * sigmoid(B)."""
    n = x.shape[dim]
    if n % 2 != 0:
        raise ConfigurationError(f"GLU needs an even channel count, got {n}")
    a, b = torch.chunk(x, 2, dim=dim)
    return a * torch.sigmoid(b)


def instance_norm(x: torch.Tensor, gain=None, bias=None, eps: float = 1e-5) -> torch.Tensor:
    """Per-channel standardization over the time axis (last dim)."""
    mu = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    y = (x - mu) / torch.sqrt(var + eps)
    if gain is not None:
        y = y * gain.unsqueeze(-1)
    if bias is not None:
        y = y + bias.unsqueeze(-1)
    return y


def adain(x: torch.Tensor, style_mean: torch.Tensor, style_scale: torch.Tensor,
          eps: float = 1e-5) -> torch.Tensor:
    """Adaptive instance norm: standardize, then apply style mean/scale.

    `style_mean`/`style_scale` carry one value per channel and broadcast
    over time; they may be batched (B, C) against x of shape (B, C, T).
    """
    mu = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    return style_scale.unsqueeze(-1) * (x - mu) / torch.sqrt(var + eps) \
        + style_mean.unsqueeze(-1)


def pixel_shuffle_1d(x: torch.Tensor, r: int) -> torch.Tensor:
    """Interleave channel groups into time: out[c, r*t + k] = x[c*r + k, t]."""
    if r == 1:
        return x
    c, t = x.shape[-2], x.shape[-1]
    if c % r != 0:
        raise ConfigurationError(f"channel count {c} not divisible by shuffle factor {r}")
    lead = x.shape[:-2]
    grouped = x.reshape(*lead, c // r, r, t)
    return grouped.transpose(-1, -2).reshape(*lead, c // r, t * r)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ModelConfig:
    """Channel plan of the four networks; defaults follow the full model."""

    mcep_dim: int = 24
    crop_len: int = 128
    base_channels: int = 128          # width of the first gated conv
    content_channels: int = 512       # content code channels
    style_dim: int = 16
    n_res_blocks: int = 4
    n_adain_blocks: int = 3
    mlp_hidden: int = 256
    disc_channels: tuple = (128, 256, 512, 1024)
    eps: float = 1e-5

    @classmethod
    def scaled(cls, divisor: int, **overrides) -> "ModelConfig":
        """Width-reduced variant for desk-scale runs; structure unchanged."""
        def shrink(c):
            return max(8, c // divisor)

        cfg = cls(
            base_channels=shrink(128),
            content_channels=shrink(512),
            mlp_hidden=shrink(256),
            disc_channels=tuple(shrink(c) for c in (128, 256, 512, 1024)),
        )
        for key, value in overrides.items():
            setattr(cfg, key, value)
        return cfg

    def to_dict(self) -> dict:
        return {
            "mcep_dim": self.mcep_dim,
            "crop_len": self.crop_len,
            "base_channels": self.base_channels,
            "content_channels": self.content_channels,
            "style_dim": self.style_dim,
            "n_res_blocks": self.n_res_blocks,
            "n_adain_blocks": self.n_adain_blocks,
            "mlp_hidden": self.mlp_hidden,
            "disc_channels": list(self.disc_channels),
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        doc = dict(doc)
        doc["disc_channels"] = tuple(doc["disc_channels"])
        return cls(**doc)


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

class SameConv1d(nn.Module):
    """Conv1d with dynamic zero padding so output length = ceil(T/stride)."""

    def __init__(self, in_ch, out_ch, kernel, stride=1):
        super().__init__()
        self.kernel = kernel
        self.stride = stride
        self.conv = nn.Conv1d(in_ch, out_ch, kernel, stride)

    def forward(self, x):
        t = x.shape[-1]
        out_t = -(-t // self.stride)
        pad = max((out_t - 1) * self.stride + self.kernel - t, 0)
        return self.conv(F.pad(x, (pad // 2, pad - pad // 2)))


class SameConv2d(nn.Module):
    def __init__(self, in_ch, out_ch, kernel, stride):
        super().__init__()
        self.kernel = kernel
        self.stride = stride
        self.conv = nn.Conv2d(in_ch, out_ch, kernel, stride)

    def forward(self, x):
        pads = []
        for dim in (-1, -2):
            size = x.shape[dim]
            k = self.kernel[dim]
            s = self.stride[dim]
            out = -(-size // s)
            pad = max((out - 1) * s + k - size, 0)
            pads.extend([pad // 2, pad - pad // 2])
        return self.conv(F.pad(x, pads))


class InstanceNorm1d(nn.Module):
    """Affine instance norm built on the functional primitive."""

    def __init__(self, channels, eps=1e-5):
        super().__init__()
        self.eps = eps
        self.gain = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        return instance_norm(x, self.gain, self.bias, self.eps)


class GatedConv1d(nn.Module):
    """Conv -> (optional IN) -> GLU; `out_ch` counts post-gating channels."""

    def __init__(self, in_ch, out_ch, kernel, stride=1, norm=True, eps=1e-5):
        super().__init__()
        self.conv = SameConv1d(in_ch, 2 * out_ch, kernel, stride)
        self.norm = InstanceNorm1d(2 * out_ch, eps) if norm else None

    def forward(self, x):
        h = self.conv(x)
        if self.norm is not None:
            h = self.norm(h)
        return glu(h, dim=-2)


class GatedConv2d(nn.Module):
    def __init__(self, in_ch, out_ch, kernel, stride):
        super().__init__()
        self.conv = SameConv2d(in_ch, 2 * out_ch, kernel, stride)

    def forward(self, x):
        return glu(self.conv(x), dim=-3)


class ResBlock1d(nn.Module):
    """conv -> IN -> GLU -> conv -> IN, plus identity skip."""

    def __init__(self, channels, kernel=3, eps=1e-5):
        super().__init__()
        self.conv1 = SameConv1d(channels, 2 * channels, kernel, 1)
        self.norm1 = InstanceNorm1d(2 * channels, eps)
        self.conv2 = SameConv1d(channels, channels, kernel, 1)
        self.norm2 = InstanceNorm1d(channels, eps)

    def forward(self, x):
        h = glu(self.norm1(self.conv1(x)), dim=-2)
        return x + self.norm2(self.conv2(h))


class AdaptiveResBlock1d(nn.Module):
    """Residual block whose normalizations are style-driven.

    One (mean, scale) pair per nominal channel serves both norm sites;
    at the pre-gating site the pair is tiled across the two GLU halves.
    """

    def __init__(self, channels, kernel=3, eps=1e-5):
        super().__init__()
        self.eps = eps
        self.conv1 = SameConv1d(channels, 2 * channels, kernel, 1)
        self.conv2 = SameConv1d(channels, channels, kernel, 1)

    def forward(self, x, style_mean, style_scale):
        doubled_mean = torch.cat([style_mean, style_mean], dim=-1)
        doubled_scale = torch.cat([style_scale, style_scale], dim=-1)
        h = adain(self.conv1(x), doubled_mean, doubled_scale, self.eps)
        h = glu(h, dim=-2)
        return x + adain(self.conv2(h), style_mean, style_scale, self.eps)


# ---------------------------------------------------------------------------
# networks
# ---------------------------------------------------------------------------

class ContentEncoder(nn.Module):
    """24 x T normalized mel-cepstra -> content code (C x T/4)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        base, content = cfg.base_channels, cfg.content_channels
        self.stem = GatedConv1d(cfg.mcep_dim, base, 15, 1, norm=True, eps=cfg.eps)
        self.down = nn.ModuleList([
            GatedConv1d(base, 2 * base, 5, 2, norm=True, eps=cfg.eps),
            GatedConv1d(2 * base, content, 5, 2, norm=True, eps=cfg.eps),
        ])
        self.res = nn.ModuleList(
            [ResBlock1d(content, 3, cfg.eps) for _ in range(cfg.n_res_blocks)]
        )
        init_weights(self)

    def forward(self, x):
        _check_mcep_input(x, self.cfg.mcep_dim)
        if x.shape[-1] % 4 != 0:
            raise ShapeError(f"content encoder needs T divisible by 4, got {x.shape[-1]}")
        h = self.stem(x)
        for layer in self.down:
            h = layer(h)
        for block in self.res:
            h = block(h)
        return h


class StyleEncoder(nn.Module):
    """24 x T mel-cepstra -> 16-dim style code (no normalization layers)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        base, content = cfg.base_channels, cfg.content_channels
        self.stem = GatedConv1d(cfg.mcep_dim, base, 15, 1, norm=False)
        self.down = nn.ModuleList([
            GatedConv1d(base, 2 * base, 5, 2, norm=False),
            GatedConv1d(2 * base, content, 5, 2, norm=False),
            GatedConv1d(content, content, 3, 2, norm=False),
            GatedConv1d(content, content, 3, 2, norm=False),
        ])
        self.proj = nn.Conv1d(content, cfg.style_dim, 1)
        init_weights(self)

    def forward(self, x):
        _check_mcep_input(x, self.cfg.mcep_dim)
        if x.shape[-1] < 16:
            raise ShapeError(f"style encoder needs T >= 16, got {x.shape[-1]}")
        h = self.stem(x)
        for layer in self.down:
            h = layer(h)
        pooled = h.mean(dim=-1, keepdim=True)
        return self.proj(pooled).squeeze(-1)


class StyleToAdain(nn.Module):
    """MLP from style code to per-block channel-wise (mean, scale) pairs."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_blocks = cfg.n_adain_blocks
        self.channels = cfg.content_channels
        hidden = cfg.mlp_hidden
        self.fc1 = nn.Linear(cfg.style_dim, 2 * hidden)
        self.fc2 = nn.Linear(hidden, 2 * hidden)
        self.head = nn.Linear(hidden, self.n_blocks * self.channels * 2)
        init_weights(self)

    def forward(self, s):
        h = glu(self.fc1(s), dim=-1)
        h = glu(self.fc2(h), dim=-1)
        params = self.head(h)
        return params.reshape(*s.shape[:-1], self.n_blocks, self.channels, 2)


class Decoder(nn.Module):
    """(content code, style code) -> 24 x T mel-cepstra."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        content = cfg.content_channels
        self.mlp = StyleToAdain(cfg)
        self.blocks = nn.ModuleList(
            [AdaptiveResBlock1d(content, 3, cfg.eps) for _ in range(cfg.n_adain_blocks)]
        )
        self.up = nn.ModuleList([
            SameConv1d(content, 4 * content, 5, 1),
            SameConv1d(content, 2 * content, 5, 1),
        ])
        self.head = SameConv1d(content // 2, cfg.mcep_dim, 15, 1)
        init_weights(self)

    def forward(self, code, style):
        if code.shape[-2] != self.cfg.content_channels:
            raise ShapeError(
                f"content code has {code.shape[-2]} channels,"
                f" expected {self.cfg.content_channels}"
            )
        params = self.mlp(style)
        h = code
        for i, block in enumerate(self.blocks):
            h = block(h, params[..., i, :, 0], params[..., i, :, 1])
        for conv in self.up:
            h = glu(pixel_shuffle_1d(conv(h), 2), dim=-2)
        return self.head(h)


class Discriminator(nn.Module):
    """2-D critic over one 24 x 128 crop; sigmoid scalar output."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.disc_channels
        self.layers = nn.ModuleList([
            GatedConv2d(1, c[0], (3, 3), (1, 2)),
            GatedConv2d(c[0], c[1], (3, 3), (2, 2)),
            GatedConv2d(c[1], c[2], (3, 3), (2, 2)),
            GatedConv2d(c[2], c[3], (6, 3), (1, 2)),
        ])
        h, w = cfg.mcep_dim, cfg.crop_len
        for stride in ((1, 2), (2, 2), (2, 2), (1, 2)):
            h = -(-h // stride[0])
            w = -(-w // stride[1])
        self.dense = nn.Linear(c[3] * h * w, 1)
        init_weights(self)

    def forward(self, x):
        if x.dim() == 3:
            x = x.unsqueeze(-3)
        if x.shape[-2] != self.cfg.mcep_dim or x.shape[-1] != self.cfg.crop_len:
            raise ShapeError(
                f"discriminator expects {self.cfg.mcep_dim} x {self.cfg.crop_len}"
                f" crops, got {tuple(x.shape[-2:])}"
            )
        h = x
        for layer in self.layers:
            h = layer(h)
        logits = self.dense(h.flatten(start_dim=-3))
        return torch.sigmoid(logits).squeeze(-1)


def _check_mcep_input(x, mcep_dim):
    if x.shape[-2] != mcep_dim:
        raise ShapeError(f"expected {mcep_dim} coefficient rows, got {x.shape[-2]}")


def init_weights(module: nn.Module, std: float = 0.02) -> None:
    """Gaussian(0, std) conv/linear weights, zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Conv2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


class ConversionModel(nn.Module):
    """The two-domain model: per-domain encoders, decoders and critics."""

    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        self.content_encoders = nn.ModuleList(
            [ContentEncoder(self.cfg) for _ in range(2)]
        )
        self.style_encoders = nn.ModuleList([StyleEncoder(self.cfg) for _ in range(2)])
        self.decoders = nn.ModuleList([Decoder(self.cfg) for _ in range(2)])
        self.discriminators = nn.ModuleList([Discriminator(self.cfg) for _ in range(2)])

    def content_encode(self, domain: int, x):
        return self.content_encoders[domain](x)

    def style_encode(self, domain: int, x):
        return self.style_encoders[domain](x)

    def decode(self, domain: int, code, style):
        return self.decoders[domain](code, style)

    def discriminate(self, domain: int, x):
        return self.discriminators[domain](x)

    def generator_parameters(self):
        for net in (*self.content_encoders, *self.style_encoders, *self.decoders):
            yield from net.parameters()

    def discriminator_parameters(self):
        for net in self.discriminators:
            yield from net.parameters()
