"""Siamese hierarchical encoder.

One weight-shared convolutional encoder maps each temporal image to a
four-scale pyramid at strides 4/8/16/32. The desk-scale default is a
plain strided-conv encoder; pretrained hierarchical encoders can be
plugged in through the ``external`` variant without touching the heads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import torch
import torch.nn as nn

STAGE_STRIDES = (4, 2, 2, 2)  # cumulative: 4, 8, 16, 32
TOTAL_STRIDE = 32


@dataclass
class BackboneConfig:
    channels: tuple[int, int, int, int] = (32, 64, 128, 256)
    blocks_per_stage: int = 2
    variant: str = "small_conv"  # or "external"

    def __post_init__(self):
        if len(self.channels) != 4 or any(c <= 0 for c in self.channels):
            raise ValueError("channels must be 4 positive ints")
        if self.variant not in ("small_conv", "external"):
            raise ValueError(f"unknown backbone variant {self.variant!r}")


class _Stage(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int, blocks: int):
        super().__init__()
        layers: list[nn.Module] = []
        # even-kernel strided downsample keeps the sampling grid mirror-symmetric
        k = 2 * stride
        layers += [
            nn.Conv2d(c_in, c_out, kernel_size=k, stride=stride, padding=stride // 2),
            nn.BatchNorm2d(c_out),
            nn.ReLU(inplace=True),
        ]
        for _ in range(blocks - 1):
            layers += [
                nn.Conv2d(c_out, c_out, kernel_size=3, padding=1),
                nn.BatchNorm2d(c_out),
                nn.ReLU(inplace=True),
            ]
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        return self.body(x)


class SiameseBackbone(nn.Module):
    """Weight-shared encoder; ``encode_pair`` runs both frames through it."""

    def __init__(self, cfg: BackboneConfig | None = None):
        super().__init__()
        self.cfg = cfg or BackboneConfig()
        if self.cfg.variant == "external":
            raise NotImplementedError(
                "external backbones plug in via set_external_encoder()"
            )
        chans = self.cfg.channels
        ins = (3,) + tuple(chans[:-1])
        self.stages = nn.ModuleList(
            _Stage(ci, co, s, self.cfg.blocks_per_stage)
            for ci, co, s in zip(ins, chans, STAGE_STRIDES)
        )
        self._frozen = False

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        if x.shape[-1] % TOTAL_STRIDE or x.shape[-2] % TOTAL_STRIDE:
            raise ValueError(
                f"input H,W must be divisible by {TOTAL_STRIDE}, got {tuple(x.shape[-2:])}"
            )
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats

    def encode_pair(
        self, t1: torch.Tensor, t2: torch.Tensor
    ) -> tuple[list[torch.Tensor], list[torch.Tensor]]:
        """(B,3,H,W) x2 -> two four-scale pyramids from the same weights."""
        if t1.shape != t2.shape:
            raise ValueError(f"t1 shape {tuple(t1.shape)} != t2 shape {tuple(t2.shape)}")
        n = t1.shape[0]
        feats = self.forward(torch.cat([t1, t2], dim=0))
        return [f[:n] for f in feats], [f[n:] for f in feats]

    # -- freezing ---------------------------------------------------------

    def freeze(self) -> None:
        """Exclude encoder parameters from optimization; idempotent."""
        for p in self.parameters():
            p.requires_grad_(False)
        self._frozen = True
        super().train(False)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def train(self, mode: bool = True):
        # a frozen encoder also keeps BN in eval mode
        return super().train(mode and not self._frozen)

    def checksum(self) -> str:
        """Digest of the full encoder state (params and buffers)."""
        h = hashlib.sha256()
        for name, tensor in sorted(self.state_dict().items()):
            h.update(name.encode())
            h.update(tensor.detach().cpu().numpy().tobytes())
        return h.hexdigest()


def images_to_tensor(*imgs) -> torch.Tensor:
    """Stack HxWx3 uint8 arrays into a (N,3,H,W) float tensor in [0,1]."""
    ts = [torch.from_numpy(im.copy()).permute(2, 0, 1).float() / 255.0 for im in imgs]
    return torch.stack(ts, dim=0)
