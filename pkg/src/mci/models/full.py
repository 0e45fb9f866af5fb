"""The joint model: shared siamese backbone feeding a detection branch
and a captioning branch, plus small inference helpers."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn

from ..data.vocab import Vocabulary
from .backbone import BackboneConfig, SiameseBackbone, images_to_tensor
from .bi3 import Bi3Config
from .captioning import CaptionConfig, CaptionHead, ids_to_sentence
from .detection import DetectionConfig, DetectionHead, logits_to_mask


@dataclass
class ModelConfig:
    vocab_size: int
    channels: tuple[int, int, int, int] = (32, 64, 128, 256)
    blocks_per_stage: int = 2
    bi3_layers: int = 3
    bi3_attn_dim: int | None = None
    share_gdfa_weights: bool = False
    embed_dim: int = 512
    decoder_layers: int = 2
    heads: int = 8
    max_len: int = 40
    max_grid: int = 32
    mlp_ratio: float = 4.0

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) != 4:
            raise ValueError("channels must list four stage widths")

    def bi3(self) -> Bi3Config:
        return Bi3Config(
            dim=self.channels[3],
            attn_dim=self.bi3_attn_dim,
            mlp_ratio=self.mlp_ratio,
            num_layers=self.bi3_layers,
            share_gdfa_weights=self.share_gdfa_weights,
        )

    def backbone(self) -> BackboneConfig:
        return BackboneConfig(channels=self.channels, blocks_per_stage=self.blocks_per_stage)

    def detection(self) -> DetectionConfig:
        return DetectionConfig(channels=self.channels, bi3=self.bi3())

    def caption(self) -> CaptionConfig:
        return CaptionConfig(
            vocab_size=self.vocab_size,
            feature_dim=self.channels[3],
            embed_dim=self.embed_dim,
            num_layers=self.decoder_layers,
            heads=self.heads,
            max_len=self.max_len,
            max_grid=self.max_grid,
            mlp_ratio=self.mlp_ratio,
            bi3=self.bi3(),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["channels"] = tuple(d["channels"])
        return cls(**d)


class ChangeCaptioner(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = SiameseBackbone(cfg.backbone())
        self.detection = DetectionHead(cfg.detection())
        self.caption = CaptionHead(cfg.caption())

    def forward(
        self, t1: torch.Tensor, t2: torch.Tensor, token_ids: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Training pass: (det_logits, cap_logits, cap_targets)."""
        pyr1, pyr2 = self.backbone.encode_pair(t1, t2)
        det_logits = self.detection(pyr1, pyr2)
        memory = self.caption.encode(pyr1[3], pyr2[3])
        cap_logits, targets = self.caption.forward_teacher(memory, token_ids)
        return det_logits, cap_logits, targets

    def detect_logits(self, t1: torch.Tensor, t2: torch.Tensor) -> torch.Tensor:
        pyr1, pyr2 = self.backbone.encode_pair(t1, t2)
        return self.detection(pyr1, pyr2)

    def generate_ids(
        self,
        t1: torch.Tensor,
        t2: torch.Tensor,
        method: str = "greedy",
        beam_size: int = 1,
    ) -> list[list[int]]:
        pyr1, pyr2 = self.backbone.encode_pair(t1, t2)
        memory = self.caption.encode(pyr1[3], pyr2[3])
        return self.caption.generate(memory, method=method, beam_size=beam_size)

    @torch.no_grad()
    def predict_mask(self, t1_img: np.ndarray, t2_img: np.ndarray) -> np.ndarray:
        """uint8 HWC image pair -> (H, W) class-id mask."""
        was_training = self.training
        self.eval()
        try:
            t1, t2 = images_to_tensor(t1_img, t2_img)
            logits = self.detect_logits(t1.unsqueeze(0), t2.unsqueeze(0))
            return logits_to_mask(logits[0])
        finally:
            self.train(was_training)

    @torch.no_grad()
    def predict_caption(
        self,
        t1_img: np.ndarray,
        t2_img: np.ndarray,
        vocab: Vocabulary,
        method: str = "greedy",
        beam_size: int = 1,
    ) -> str:
        was_training = self.training
        self.eval()
        try:
            t1, t2 = images_to_tensor(t1_img, t2_img)
            ids = self.generate_ids(
                t1.unsqueeze(0), t2.unsqueeze(0), method=method, beam_size=beam_size
            )
            return ids_to_sentence(ids[0], vocab)
        finally:
            self.train(was_training)


def build_model(cfg: ModelConfig) -> ChangeCaptioner:
    return ChangeCaptioner(cfg)
