"""Two-phase trainer: joint optimization under the balanced loss, then a
branch-separate phase with a frozen backbone once validation stalls."""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .data.corpus import ImagePair, CaptionRecord, ChangeMask, load_corpus
from .data.vocab import PAD_ID, Vocabulary, build_vocabulary
from .losses import loss_cap, loss_det, loss_total
from .metrics import bleu, miou
from .models.backbone import images_to_tensor
from .models.detection import logits_to_mask
from .models.full import ChangeCaptioner, ModelConfig


@dataclass
class TrainConfig:
    lr: float = 1e-4
    max_epochs: int = 200
    patience: int = 50
    batch_size: int = 4
    grad_clip: float = 5.0
    seed: int = 0
    caption_selection: str = "random"  # or "first"
    min_freq: int = 1

    def __post_init__(self):
        if self.max_epochs < 1 or self.patience < 1 or self.batch_size < 1:
            raise ValueError("max_epochs, patience and batch_size must be positive")
        if self.caption_selection not in ("random", "first"):
            raise ValueError("caption_selection must be 'random' or 'first'")


class PatienceTracker:
    """Counts consecutive non-improving epochs; strictly-greater improves."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -math.inf
        self.bad_epochs = 0

    def update(self, value: float) -> bool:
        if value > self.best:
            self.best = value
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def expired(self) -> bool:
        return self.bad_epochs >= self.patience


@dataclass
class TrainItem:
    t1: torch.Tensor
    t2: torch.Tensor
    mask: torch.Tensor
    captions: list[list[int]]  # five id sequences, BOS..EOS
    raw_sentences: list[str]


def build_items(
    stream: list[tuple[ImagePair, ChangeMask, CaptionRecord]],
    vocab: Vocabulary,
    max_len: int | None = None,
) -> list[TrainItem]:
    items = []
    for pair, mask, record in stream:
        t1, t2 = images_to_tensor(pair.t1, pair.t2)
        captions = record.token_ids(vocab)
        if max_len is not None:
            # decoder input is ids[:-1], so a full-length sequence still fits
            captions = [seq[: max_len + 1] for seq in captions]
        items.append(
            TrainItem(
                t1=t1,
                t2=t2,
                mask=torch.from_numpy(mask.labels.astype(np.int64)),
                captions=captions,
                raw_sentences=list(record.sentences),
            )
        )
    return items


def collate(
    items: list[TrainItem], caption_idx: list[int]
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    t1 = torch.stack([it.t1 for it in items])
    t2 = torch.stack([it.t2 for it in items])
    masks = torch.stack([it.mask for it in items])
    seqs = [it.captions[k] for it, k in zip(items, caption_idx)]
    width = max(len(s) for s in seqs)
    ids = torch.full((len(seqs), width), PAD_ID, dtype=torch.long)
    for row, seq in enumerate(seqs):
        ids[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
    return t1, t2, masks, ids


def _batches(n: int, batch_size: int, rng: random.Random | None) -> list[list[int]]:
    order = list(range(n))
    if rng is not None:
        rng.shuffle(order)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


@torch.no_grad()
def evaluate_model(
    model: ChangeCaptioner, items: list[TrainItem], vocab: Vocabulary
) -> tuple[float, float]:
    """(MIoU, BLEU-4) with greedy decoding over an item list."""
    was_training = model.training
    model.eval()
    preds, gts, cands, refs = [], [], [], []
    for it in items:
        logits = model.detect_logits(it.t1.unsqueeze(0), it.t2.unsqueeze(0))
        preds.append(logits_to_mask(logits[0]))
        gts.append(it.mask.numpy())
        ids = model.generate_ids(it.t1.unsqueeze(0), it.t2.unsqueeze(0))[0]
        cands.append(" ".join(vocab.decode(ids)))
        refs.append(list(it.raw_sentences))
    model.train(was_training)
    return miou(preds, gts), bleu(cands, refs)[3]


def _epoch_losses(sums: dict, n_batches: int) -> tuple[float, float, float]:
    return tuple(sums[k] / max(1, n_batches) for k in ("det", "cap", "total"))


def run_schedule(
    data_root: str | Path,
    model_cfg_overrides: dict | None,
    train_cfg: TrainConfig,
    out_dir: str | Path,
) -> dict:
    """Full schedule over a corpus directory; returns paths and history."""
    torch.manual_seed(train_cfg.seed)
    rng = random.Random(train_cfg.seed)
    data_root = Path(data_root)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_stream = list(load_corpus(data_root, "train"))
    if not train_stream:
        raise ValueError(f"no training pairs under {data_root}")
    val_stream = list(load_corpus(data_root, "val")) or train_stream
    vocab = build_vocabulary(
        (s for _, _, rec in train_stream for s in rec.sentences),
        min_freq=train_cfg.min_freq,
    )
    overrides = dict(model_cfg_overrides or {})
    overrides["vocab_size"] = len(vocab)
    model_cfg = ModelConfig(**overrides)
    model = ChangeCaptioner(model_cfg)

    train_items = build_items(train_stream, vocab, model_cfg.max_len)
    val_items = build_items(val_stream, vocab, model_cfg.max_len)

    history: list[dict] = []
    tracker = PatienceTracker(train_cfg.patience)
    phase = "joint"
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.lr)
    det_opt = cap_opt = None
    best_det = -math.inf
    best_cap = -math.inf
    paths = {
        "best_det": out_dir / "best_det.pt",
        "best_cap": out_dir / "best_cap.pt",
        "last": out_dir / "last.pt",
        "history": out_dir / "history.csv",
    }

    def pick_captions(batch: list[int]) -> list[int]:
        if train_cfg.caption_selection == "first":
            return [0] * len(batch)
        return [rng.randrange(len(train_items[i].captions)) for i in batch]

    for epoch in range(1, train_cfg.max_epochs + 1):
        model.train()
        sums = {"det": 0.0, "cap": 0.0, "total": 0.0}
        batches = _batches(len(train_items), train_cfg.batch_size, rng)
        for batch in batches:
            t1, t2, masks, ids = collate([train_items[i] for i in batch], pick_captions(batch))
            if phase == "joint":
                det_logits, cap_logits, targets = model(t1, t2, ids)
                ld = loss_det(det_logits, masks)
                lc = loss_cap(cap_logits, targets)
                lt = loss_total(ld, lc)
                optimizer.zero_grad()
                lt.backward()
                torch.nn.utils.clip_grad_norm_(model.parameters(), train_cfg.grad_clip)
                optimizer.step()
            else:
                with torch.no_grad():
                    pyr1, pyr2 = model.backbone.encode_pair(t1, t2)
                ld = loss_det(model.detection(pyr1, pyr2), masks)
                det_opt.zero_grad()
                ld.backward()
                torch.nn.utils.clip_grad_norm_(model.detection.parameters(), train_cfg.grad_clip)
                det_opt.step()
                memory = model.caption.encode(pyr1[3], pyr2[3])
                cap_logits, targets = model.caption.forward_teacher(memory, ids)
                lc = loss_cap(cap_logits, targets)
                cap_opt.zero_grad()
                lc.backward()
                torch.nn.utils.clip_grad_norm_(model.caption.parameters(), train_cfg.grad_clip)
                cap_opt.step()
                lt = loss_total(ld.detach(), lc.detach())
            sums["det"] += float(ld.detach())
            sums["cap"] += float(lc.detach())
            sums["total"] += float(lt.detach())

        val_miou, val_bleu4 = evaluate_model(model, val_items, vocab)
        mean_det, mean_cap, mean_total = _epoch_losses(sums, len(batches))
        history.append(
            {
                "epoch": epoch,
                "l_det": mean_det,
                "l_cap": mean_cap,
                "l_total": mean_total,
                "miou": val_miou,
                "bleu4": val_bleu4,
                "phase": phase,
            }
        )
        if val_miou > best_det:
            best_det = val_miou
            save_checkpoint(paths["best_det"], model, vocab)
        if val_bleu4 > best_cap:
            best_cap = val_bleu4
            save_checkpoint(paths["best_cap"], model, vocab)
        if phase == "joint":
            tracker.update(val_miou + val_bleu4)
            if tracker.expired:
                phase = "branches"
                model.backbone.freeze()
                det_opt = torch.optim.Adam(model.detection.parameters(), lr=train_cfg.lr)
                cap_opt = torch.optim.Adam(model.caption.parameters(), lr=train_cfg.lr)

    save_checkpoint(paths["last"], model, vocab)
    with open(paths["history"], "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "l_det", "l_cap", "l_total", "miou", "bleu4"])
        for row in history:
            writer.writerow(
                [row["epoch"], row["l_det"], row["l_cap"], row["l_total"], row["miou"], row["bleu4"]]
            )
    return {"paths": {k: str(v) for k, v in paths.items()}, "history": history, "vocab": vocab}


def overfit_steps(
    model: ChangeCaptioner,
    items: list[TrainItem],
    steps: int,
    lr: float = 1e-3,
    batch_size: int = 4,
    grad_clip: float = 5.0,
    seed: int = 0,
) -> list[dict]:
    """Fixed-step joint training loop used by the smoke runs."""
    torch.manual_seed(seed)
    rng = random.Random(seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    model.train()
    log = []
    step = 0
    while step < steps:
        for batch in _batches(len(items), batch_size, rng):
            if step >= steps:
                break
            t1, t2, masks, ids = collate([items[i] for i in batch], [0] * len(batch))
            det_logits, cap_logits, targets = model(t1, t2, ids)
            ld = loss_det(det_logits, masks)
            lc = loss_cap(cap_logits, targets)
            lt = loss_total(ld, lc)
            optimizer.zero_grad()
            lt.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), grad_clip)
            optimizer.step()
            log.append(
                {
                    "step": step,
                    "l_det": float(ld.detach()),
                    "l_cap": float(lc.detach()),
                    "l_total": float(lt.detach()),
                }
            )
            step += 1
    return log
