"""On-disk corpus format: reader and record types.

Layout::

    root/
      captions.json                  {"images": [{"filename", "split", "sentences"}]}
      {train,val,test}/
        A/<name>.png                 time-1 image
        B/<name>.png                 time-2 image
        label/<name>.png             RGB change mask (see codec)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image

from .codec import decode_mask
from .vocab import Vocabulary, tokenize

SPLITS = ("train", "val", "test")
SENTENCES_PER_PAIR = 5


class CorpusError(Exception):
    """A corpus directory violates the on-disk contract."""

    def __init__(self, message: str, pair_id: str | None = None):
        self.pair_id = pair_id
        super().__init__(message if pair_id is None else f"[pair {pair_id}] {message}")


@dataclass
class ImagePair:
    id: str
    t1: np.ndarray  # (H, W, 3) uint8
    t2: np.ndarray  # (H, W, 3) uint8
    resolution_m_per_px: float = 0.5
    split: str = "train"

    def __post_init__(self):
        if self.t1.shape != self.t2.shape:
            raise CorpusError(
                f"t1 shape {self.t1.shape} != t2 shape {self.t2.shape}", self.id
            )
        if self.resolution_m_per_px <= 0:
            raise CorpusError("resolution must be positive", self.id)

    @property
    def height(self) -> int:
        return self.t1.shape[0]

    @property
    def width(self) -> int:
        return self.t1.shape[1]


@dataclass
class ChangeMask:
    labels: np.ndarray  # (H, W) int64 over {0, 1, 2}


@dataclass
class CaptionRecord:
    pair_id: str
    sentences: list[str]
    tokens: list[list[str]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.sentences) != SENTENCES_PER_PAIR:
            raise CorpusError(
                f"expected {SENTENCES_PER_PAIR} sentences, got {len(self.sentences)}",
                self.pair_id,
            )
        if not self.tokens:
            self.tokens = [tokenize(s) for s in self.sentences]

    def token_ids(self, vocab: Vocabulary) -> list[list[int]]:
        return [vocab.encode_tokens(t) for t in self.tokens]


def _load_rgb(path: Path, pair_id: str) -> np.ndarray:
    if not path.exists():
        raise CorpusError(f"missing file {path}", pair_id)
    return np.asarray(Image.open(path).convert("RGB"))


def read_captions_index(root: Path) -> dict[str, dict]:
    """captions.json -> {filename: entry}."""
    path = Path(root) / "captions.json"
    if not path.exists():
        raise CorpusError(f"missing captions file {path}")
    with open(path) as fh:
        payload = json.load(fh)
    return {entry["filename"]: entry for entry in payload.get("images", [])}


def load_corpus(
    root_dir,
    split: str,
    resolution_m_per_px: float = 0.5,
) -> Iterator[tuple[ImagePair, ChangeMask, CaptionRecord]]:
    """Stream (pair, mask, captions) records for one split.

    Iteration order is lexicographic by filename. An empty or missing split
    directory yields an empty stream.
    """
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
    root = Path(root_dir)
    a_dir = root / split / "A"
    if not a_dir.is_dir():
        return
    captions = read_captions_index(root)
    for a_path in sorted(a_dir.glob("*.png")):
        name = a_path.name
        pair_id = a_path.stem
        t1 = _load_rgb(a_path, pair_id)
        t2 = _load_rgb(root / split / "B" / name, pair_id)
        mask_path = root / split / "label" / name
        if not mask_path.exists():
            raise CorpusError(f"missing file {mask_path}", pair_id)
        mask_rgb = np.asarray(Image.open(mask_path).convert("RGB"))
        labels = decode_mask(mask_rgb)
        if labels.shape != t1.shape[:2]:
            raise CorpusError(
                f"mask shape {labels.shape} != image shape {t1.shape[:2]}", pair_id
            )
        entry = captions.get(name)
        if entry is None:
            raise CorpusError(f"no captions.json entry for {name}", pair_id)
        record = CaptionRecord(
            pair_id=pair_id,
            sentences=[s["raw"] for s in entry["sentences"]],
        )
        pair = ImagePair(
            id=pair_id,
            t1=t1,
            t2=t2,
            resolution_m_per_px=resolution_m_per_px,
            split=split,
        )
        yield pair, ChangeMask(labels=labels), record


def corpus_captions(root_dir, split: str) -> list[str]:
    """All raw caption strings of one split (for vocabulary building)."""
    root = Path(root_dir)
    captions = read_captions_index(root)
    out: list[str] = []
    for name in sorted(captions):
        entry = captions[name]
        if entry.get("split") == split:
            out.extend(s["raw"] for s in entry["sentences"])
    return out
