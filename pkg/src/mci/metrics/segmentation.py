"""Segmentation scoring: one global confusion matrix, per-class IoU, MIoU."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..data.codec import NUM_CLASSES


class ConfusionMatrix:
    """Accumulates counts[gt, pred] over a corpus."""

    def __init__(self, num_classes: int = NUM_CLASSES):
        if num_classes < 1:
            raise ValueError("num_classes must be positive")
        self.num_classes = num_classes
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def update(self, pred: np.ndarray, gt: np.ndarray) -> None:
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        if pred.shape != gt.shape:
            raise ValueError(f"pred shape {pred.shape} != gt shape {gt.shape}")
        if pred.min() < 0 or pred.max() >= self.num_classes:
            raise ValueError("pred classes out of range")
        if gt.min() < 0 or gt.max() >= self.num_classes:
            raise ValueError("gt classes out of range")
        idx = gt.reshape(-1).astype(np.int64) * self.num_classes + pred.reshape(-1)
        self.counts += np.bincount(idx, minlength=self.num_classes**2).reshape(
            self.num_classes, self.num_classes
        )

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ValueError("class count mismatch")
        out = ConfusionMatrix(self.num_classes)
        out.counts = self.counts + other.counts
        return out

    def tp(self, c: int) -> int:
        return int(self.counts[c, c])

    def fp(self, c: int) -> int:
        return int(self.counts[:, c].sum() - self.counts[c, c])

    def fn(self, c: int) -> int:
        return int(self.counts[c, :].sum() - self.counts[c, c])

    def iou(self, c: int) -> float:
        denom = self.tp(c) + self.fp(c) + self.fn(c)
        if denom == 0:
            # class absent corpus-wide in both pred and gt
            return 1.0
        return self.tp(c) / denom

    def miou(self) -> float:
        return float(np.mean([self.iou(c) for c in range(self.num_classes)]))


def miou(
    preds: Iterable[np.ndarray],
    gts: Iterable[np.ndarray],
    num_classes: int = NUM_CLASSES,
) -> float:
    """Corpus MIoU from a single global confusion matrix."""
    cm = ConfusionMatrix(num_classes)
    preds = list(preds)
    gts = list(gts)
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if not preds:
        raise ValueError("empty mask stream")
    for p, g in zip(preds, gts):
        cm.update(p, g)
    return cm.miou()
