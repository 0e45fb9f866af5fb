"""Shared fixtures. The expensive pieces (synthetic corpora, the overfit
smoke run) are session-scoped so the whole suite pays for them once."""

from __future__ import annotations

import io
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from mci.checkpoint import save_checkpoint
from mci.data.corpus import load_corpus
from mci.data.synth import synthesize_corpus
from mci.data.vocab import Vocabulary, build_vocabulary
from mci.metrics import bleu, miou
from mci.models.detection import logits_to_mask
from mci.models.full import ChangeCaptioner, ModelConfig
from mci.trainer import TrainItem, build_items, overfit_steps

# the smoke-test configuration; scripts/overfit_demo.py uses the same one
TINY = dict(
    channels=(16, 32, 64, 96),
    blocks_per_stage=1,
    bi3_layers=2,
    embed_dim=128,
    decoder_layers=1,
    heads=4,
    max_len=40,
    max_grid=8,
)

torch.set_num_threads(min(4, os.cpu_count() or 1))

# the canonical agent request, also used by scripts/agent_demo.py: detect,
# recolor buildings green and roads blue, count the buildings
DEMO_PLAN = """Looking at the pair now.
```plan
[
  {"id": "mask", "tool": "detect_changes", "args": {"pair_ref": {"$ref": "pair"}}},
  {"id": "vis", "tool": "recolor_mask",
   "args": {"mask_ref": {"$ref": "mask"}, "mapping": "building:green,road:blue"}},
  {"id": "n", "tool": "count_objects",
   "args": {"mask_ref": {"$ref": "mask"}, "class": "building"}},
  {"respond": "Detected the changes. {n} buildings changed; see the recolored map."}
]
```"""


def png_bytes(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def make_tiny_model(vocab_size: int, seed: int = 0, **overrides) -> ChangeCaptioner:
    cfg = dict(TINY, **overrides)
    torch.manual_seed(seed)
    return ChangeCaptioner(ModelConfig(vocab_size=vocab_size, **cfg))


@dataclass
class OverfitRun:
    corpus: Path
    log: dict
    model: ChangeCaptioner
    vocab: Vocabulary
    items: list[TrainItem]
    step_log: list[dict] = field(default_factory=list)
    miou: float = 0.0
    bleu1: float = 0.0
    bleu4: float = 0.0
    elapsed_s: float = 0.0
    checkpoint: Path | None = None


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> tuple[Path, dict]:
    """A quick 6-pair 64px corpus for dataset and agent tests."""
    root = tmp_path_factory.mktemp("small") / "corpus"
    log = synthesize_corpus(seed=3, n_pairs=6, size=64, out_dir=root)
    return root, log


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory) -> OverfitRun:
    """The smoke run: 16 train pairs (seed 7, 128px), tiny config, 200 steps.

    Several acceptance criteria read off this single run: the loss-balance
    identity over its step log, the MIoU/BLEU-1 floors, the wall clock, and
    the checkpoint that the agent-replay and gateway tests load.
    """
    base = tmp_path_factory.mktemp("overfit")
    corpus = base / "corpus"
    t0 = time.time()
    log = synthesize_corpus(seed=7, n_pairs=21, size=128, out_dir=corpus)
    stream = list(load_corpus(corpus, "train"))
    assert len(stream) == 16
    vocab = build_vocabulary(s for _, _, rec in stream for s in rec.sentences)
    model = make_tiny_model(len(vocab), seed=7)
    items = build_items(stream, vocab, model.cfg.max_len)
    step_log = overfit_steps(model, items, steps=200, lr=2e-3, batch_size=4, seed=7)
    elapsed = time.time() - t0

    model.eval()
    preds, gts, cands, refs = [], [], [], []
    with torch.no_grad():
        for it in items:
            logits = model.detect_logits(it.t1.unsqueeze(0), it.t2.unsqueeze(0))
            preds.append(logits_to_mask(logits[0]))
            gts.append(it.mask.numpy())
            ids = model.generate_ids(it.t1.unsqueeze(0), it.t2.unsqueeze(0))[0]
            cands.append(" ".join(vocab.decode(ids)))
            refs.append(list(it.raw_sentences))
    scores = bleu(cands, refs)
    ckpt = save_checkpoint(base / "overfit.pt", model, vocab)
    return OverfitRun(
        corpus=corpus,
        log=log,
        model=model,
        vocab=vocab,
        items=items,
        step_log=step_log,
        miou=miou(preds, gts),
        bleu1=scores[0],
        bleu4=scores[3],
        elapsed_s=elapsed,
        checkpoint=ckpt,
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    rows = []
    for outcome in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(outcome, ()):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid or "::" not in nodeid:
                continue
            if outcome == "passed" and rep.when != "call":
                continue
            rows.append((nodeid.split("::")[-1], outcome.upper()))
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in sorted(set(rows)):
        mark = {"PASSED": "PASS", "FAILED": "FAIL", "ERROR": "FAIL", "SKIPPED": "SKIP"}[outcome]
        terminalreporter.write_line(f"[{mark}] {name}")
