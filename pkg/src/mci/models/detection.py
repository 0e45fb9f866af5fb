"""Pixel-level change branch.

Per-scale convolutional fusion with a difference conv plus a cosine
similarity map, a BI3 stack on the coarsest scale, then bottom-up
transposed-conv decoding to 3-class logits at input resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.codec import NUM_CLASSES
from .bi3 import Bi3Config, Bi3Stack


def cosine_map(x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
    """Per-pixel cosine similarity over channels, (B,1,h,w).

    Pixels where either vector is all-zero get similarity 0.
    """
    num = (x1 * x2).sum(dim=1, keepdim=True)
    den = x1.norm(dim=1, keepdim=True) * x2.norm(dim=1, keepdim=True)
    return num / den.clamp_min(1e-12) * (den > 0)


class ConvBitemporalFusion(nn.Module):
    """S = conv3x3(x2-x1) + cos(x1,x2); out = conv1x1(ReLU(BN(conv3x3([x1,S,x2]))))."""

    def __init__(self, dim: int):
        super().__init__()
        self.diff_conv = nn.Conv2d(dim, dim, 3, padding=1)
        self.fuse_conv = nn.Conv2d(3 * dim, dim, 3, padding=1)
        self.bn = nn.BatchNorm2d(dim)
        self.out_conv = nn.Conv2d(dim, dim, 1)

    def forward(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        if x1.shape != x2.shape:
            raise ValueError(f"x1 shape {tuple(x1.shape)} != x2 shape {tuple(x2.shape)}")
        s = self.diff_conv(x2 - x1) + cosine_map(x1, x2)
        f = torch.cat([x1, s, x2], dim=1)
        return self.out_conv(F.relu(self.bn(self.fuse_conv(f))))


@dataclass
class DetectionConfig:
    channels: tuple[int, int, int, int] = (32, 64, 128, 256)
    bi3: Bi3Config = field(default_factory=lambda: Bi3Config(dim=256))

    def __post_init__(self):
        if self.bi3.dim != self.channels[3]:
            raise ValueError("bi3 dim must equal the scale-4 channel width")


class DetectionHead(nn.Module):
    def __init__(self, cfg: DetectionConfig):
        super().__init__()
        self.cfg = cfg
        c1, c2, c3, c4 = cfg.channels
        self.bi3_stack = Bi3Stack(cfg.bi3)
        self.cbf = nn.ModuleList(ConvBitemporalFusion(c) for c in cfg.channels)
        # bottom-up: deconv from scale s+1 to s, then a 1x1 channel adapter
        self.deconv = nn.ModuleList(
            nn.ConvTranspose2d(c_hi, c_hi, kernel_size=2, stride=2)
            for c_hi in (c2, c3, c4)
        )
        self.adapt = nn.ModuleList(
            nn.Conv2d(c_hi, c_lo, 1) for c_lo, c_hi in ((c1, c2), (c2, c3), (c3, c4))
        )
        self.classifier = nn.Conv2d(c1, NUM_CLASSES, 1)

    def forward(
        self, pyr1: list[torch.Tensor], pyr2: list[torch.Tensor]
    ) -> torch.Tensor:
        if len(pyr1) != 4 or len(pyr2) != 4:
            raise ValueError("expected four-scale pyramids")
        for a, b in zip(pyr1, pyr2):
            if a.shape != b.shape:
                raise ValueError("pyramid shape mismatch between frames")
        z1, z2 = self.bi3_stack(pyr1[3], pyr2[3])
        d = self.cbf[3](z1, z2)
        for s in (2, 1, 0):
            d = self.cbf[s](pyr1[s], pyr2[s]) + self.adapt[s](self.deconv[s](d))
        logits = self.classifier(d)
        return F.interpolate(
            logits, scale_factor=4, mode="bilinear", align_corners=False
        )

    detect = forward


def logits_to_mask(logits: torch.Tensor | np.ndarray) -> np.ndarray:
    """Per-pixel argmax over the class axis; ties go to the lowest class id.

    Accepts (3,H,W) / (H,W,3) tensors or arrays; returns (H,W) int64.
    """
    if isinstance(logits, torch.Tensor):
        logits = logits.detach().cpu().numpy()
    logits = np.asarray(logits)
    if logits.ndim != 3:
        raise ValueError(f"expected a single-image logit raster, got shape {logits.shape}")
    if logits.shape[0] == NUM_CLASSES and logits.shape[-1] != NUM_CLASSES:
        logits = np.moveaxis(logits, 0, -1)
    if logits.shape[-1] != NUM_CLASSES:
        raise ValueError(f"no class axis of size {NUM_CLASSES} in shape {logits.shape}")
    if np.isnan(logits).any():
        raise ValueError("logits contain NaN")
    # np.argmax returns the first (lowest) index on ties
    return np.argmax(logits, axis=-1).astype(np.int64)
