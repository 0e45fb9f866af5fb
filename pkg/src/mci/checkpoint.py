"""Checkpoint serialization: weights + config + vocab in one torch file."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch

from .data.vocab import Vocabulary
from .models.full import ChangeCaptioner, ModelConfig


def config_hash(cfg: ModelConfig) -> str:
    payload = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def save_checkpoint(
    path: str | Path, model: ChangeCaptioner, vocab: Vocabulary
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "model": model.state_dict(),
            "config": model.cfg.to_dict(),
            "config_hash": config_hash(model.cfg),
            "vocab": vocab.to_dict(),
        },
        path,
    )
    return path


def load_checkpoint(path: str | Path) -> tuple[ChangeCaptioner, Vocabulary]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no checkpoint at {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    for key in ("model", "config", "config_hash", "vocab"):
        if key not in payload:
            raise ValueError(f"checkpoint missing field {key!r}")
    cfg = ModelConfig.from_dict(payload["config"])
    if config_hash(cfg) != payload["config_hash"]:
        raise ValueError("checkpoint config hash mismatch")
    model = ChangeCaptioner(cfg)
    model.load_state_dict(payload["model"])
    model.eval()
    vocab = Vocabulary.from_dict(payload["vocab"])
    return model, vocab


def checkpoint_id(path: str | Path) -> str:
    """Content hash of the checkpoint file itself."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
