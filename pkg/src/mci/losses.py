"""Multi-task objective: pixel cross-entropy, token cross-entropy, and a
detached-normalization sum that keeps both tasks at the same magnitude."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .data.codec import NUM_CLASSES
from .data.vocab import PAD_ID


@dataclass
class LossReport:
    l_det: float
    l_cap: float
    l_total: float
    step: int

    def as_row(self) -> tuple[float, float, float]:
        return (self.l_det, self.l_cap, self.l_total)


def loss_det(logits: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean pixel cross-entropy; logits (B,3,H,W) or (3,H,W), gt int mask."""
    if logits.ndim == 3:
        logits = logits.unsqueeze(0)
    if gt.ndim == 2:
        gt = gt.unsqueeze(0)
    if logits.shape[1] != NUM_CLASSES:
        raise ValueError(f"expected {NUM_CLASSES}-class logits, got {logits.shape[1]}")
    if logits.shape[0] != gt.shape[0] or logits.shape[2:] != gt.shape[1:]:
        raise ValueError(
            f"logit raster {tuple(logits.shape)} does not match mask {tuple(gt.shape)}"
        )
    if gt.min() < 0 or gt.max() >= NUM_CLASSES:
        raise ValueError("mask classes out of range")
    return F.cross_entropy(logits, gt.long())


def loss_cap(step_logits: torch.Tensor, targets: torch.Tensor, pad_id: int = PAD_ID) -> torch.Tensor:
    """Mean token cross-entropy over non-PAD target positions."""
    if step_logits.ndim == 2:
        step_logits = step_logits.unsqueeze(0)
    if targets.ndim == 1:
        targets = targets.unsqueeze(0)
    if step_logits.shape[:2] != targets.shape:
        raise ValueError(
            f"logits {tuple(step_logits.shape)} do not align with targets {tuple(targets.shape)}"
        )
    vocab_size = step_logits.shape[-1]
    if targets.max() >= vocab_size or targets.min() < 0:
        raise ValueError(f"target id outside vocabulary of size {vocab_size}")
    if not (targets != pad_id).any():
        raise ValueError("no non-PAD target positions")
    return F.cross_entropy(
        step_logits.reshape(-1, vocab_size), targets.reshape(-1).long(), ignore_index=pad_id
    )


def _balanced(term: torch.Tensor) -> torch.Tensor:
    # zero loss: normalization would divide by zero, use the raw term
    if float(term.detach()) == 0.0:
        return term
    return term / term.detach()


def loss_total(l_det: torch.Tensor, l_cap: torch.Tensor) -> torch.Tensor:
    """l_det/detach(l_det) + l_cap/detach(l_cap).

    The value is 2 whenever both losses are positive; each term's gradient
    is the raw gradient scaled by 1/loss, which keeps the two tasks on the
    same order of magnitude without tuning weights.
    """
    return _balanced(l_det) + _balanced(l_cap)
