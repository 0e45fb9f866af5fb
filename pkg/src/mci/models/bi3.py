"""Bi-temporal interaction layer: LPE + difference-guided attention.

LPE enriches each stream with multi-kernel local context and a residual.
The attention block derives keys/values from the feature difference gated
by the anchor stream, so positions that changed dominate the mixing. A
layer then applies the usual post-norm MLP on both streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass
class Bi3Config:
    dim: int
    attn_dim: int | None = None  # defaults to dim
    mlp_ratio: float = 4.0
    num_layers: int = 3
    share_gdfa_weights: bool = False

    def __post_init__(self):
        if self.attn_dim is None:
            self.attn_dim = self.dim
        if self.dim <= 0 or self.attn_dim <= 0:
            raise ValueError("dim and attn_dim must be positive")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")


class LocalPerceptionEnhance(nn.Module):
    """Multi-kernel conv block with a non-negative residual add.

    out = ReLU(BN(conv1x1(concat[conv3x3(x), conv5x1(x), conv1x5(x)]))) + x
    """

    def __init__(self, dim: int):
        super().__init__()
        self.conv3 = nn.Conv2d(dim, dim, 3, padding=1)
        self.conv5x1 = nn.Conv2d(dim, dim, (5, 1), padding=(2, 0))
        self.conv1x5 = nn.Conv2d(dim, dim, (1, 5), padding=(0, 2))
        self.fuse = nn.Conv2d(3 * dim, dim, 1)
        self.bn = nn.BatchNorm2d(dim)
        self.act = nn.ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        f = torch.cat([self.conv3(x), self.conv5x1(x), self.conv1x5(x)], dim=1)
        return self.act(self.bn(self.fuse(f))) + x


class DifferenceFusionAttention(nn.Module):
    """Single-head attention with difference-gated keys and values.

    Given anchor/other token grids (B, N, C):
        dif = other - anchor
        g   = (dif * anchor) W_d + b_d
        out = softmax((anchor W_q)(g W_k)^T / sqrt(d)) (g W_v)
    """

    def __init__(self, dim: int, attn_dim: int):
        super().__init__()
        self.attn_dim = attn_dim
        self.w_q = nn.Linear(dim, attn_dim)
        # keys/values read the gated difference g, which lives in attn_dim
        self.w_k = nn.Linear(attn_dim, attn_dim)
        self.w_v = nn.Linear(attn_dim, attn_dim)
        self.w_d = nn.Linear(dim, attn_dim)

    def forward(
        self,
        anchor: torch.Tensor,
        other: torch.Tensor,
        return_attention: bool = False,
    ):
        if anchor.shape != other.shape:
            raise ValueError(
                f"anchor shape {tuple(anchor.shape)} != other shape {tuple(other.shape)}"
            )
        dif = other - anchor
        g = self.w_d(dif * anchor)
        q = self.w_q(anchor)
        k = self.w_k(g)
        v = self.w_v(g)
        scores = torch.matmul(q, k.transpose(-2, -1)) / math.sqrt(self.attn_dim)
        attn = torch.softmax(scores, dim=-1)
        out = torch.matmul(attn, v)
        if return_attention:
            return out, attn
        return out


class Bi3Layer(nn.Module):
    """One interaction layer over a pair of (B, C, h, w) feature maps.

    The LPE, norms, and MLP are shared between the two streams; the two
    attention directions get separate parameters unless configured to share.
    """

    def __init__(self, cfg: Bi3Config):
        super().__init__()
        self.cfg = cfg
        c, d = cfg.dim, cfg.attn_dim
        self.lpe = LocalPerceptionEnhance(c)
        self.attn_left = DifferenceFusionAttention(c, d)
        self.attn_right = (
            self.attn_left if cfg.share_gdfa_weights else DifferenceFusionAttention(c, d)
        )
        self.proj = nn.Linear(d, c) if d != c else nn.Identity()
        self.norm_attn = nn.LayerNorm(c)
        hidden = int(round(c * cfg.mlp_ratio))
        self.mlp = nn.Sequential(nn.Linear(c, hidden), nn.GELU(), nn.Linear(hidden, c))
        self.norm_mlp = nn.LayerNorm(c)

    @staticmethod
    def to_tokens(x: torch.Tensor) -> torch.Tensor:
        return x.flatten(2).transpose(1, 2)  # (B, N, C), row-major

    @staticmethod
    def to_map(tokens: torch.Tensor, h: int, w: int) -> torch.Tensor:
        return tokens.transpose(1, 2).reshape(tokens.shape[0], -1, h, w)

    def forward(
        self, x1: torch.Tensor, x2: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        if x1.shape != x2.shape:
            raise ValueError(f"x1 shape {tuple(x1.shape)} != x2 shape {tuple(x2.shape)}")
        h, w = x1.shape[-2:]
        l1, l2 = self.lpe(x1), self.lpe(x2)
        t1, t2 = self.to_tokens(l1), self.to_tokens(l2)
        y1 = self.norm_attn(t1 + self.proj(self.attn_left(t1, t2)))
        y2 = self.norm_attn(t2 + self.proj(self.attn_right(t2, t1)))
        z1 = self.norm_mlp(y1 + self.mlp(y1))
        z2 = self.norm_mlp(y2 + self.mlp(y2))
        return self.to_map(z1, h, w), self.to_map(z2, h, w)


class Bi3Stack(nn.Module):
    """num_layers interaction layers with per-layer residual connections."""

    def __init__(self, cfg: Bi3Config):
        super().__init__()
        self.cfg = cfg
        self.layers = nn.ModuleList(Bi3Layer(cfg) for _ in range(cfg.num_layers))

    def forward(
        self, x1: torch.Tensor, x2: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        for layer in self.layers:
            z1, z2 = layer(x1, x2)
            x1 = x1 + z1
            x2 = x2 + z2
        return x1, x2
