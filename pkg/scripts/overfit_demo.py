#!/usr/bin/env python3
"""Synthesize a tiny corpus, overfit the joint model on it, report metrics,
and save a checkpoint usable by the gateway and agent demos.

Usage: python3 scripts/overfit_demo.py [--out runs/overfit] [--steps 200]
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

import torch

from mci.checkpoint import save_checkpoint
from mci.data.corpus import load_corpus
from mci.data.synth import synthesize_corpus
from mci.data.vocab import build_vocabulary
from mci.metrics import bleu
from mci.models.full import ChangeCaptioner, ModelConfig
from mci.trainer import build_items, evaluate_model, overfit_steps

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


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="runs/overfit")
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--pairs", type=int, default=21, help="total pairs; 21 -> 16 train")
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--lr", type=float, default=2e-3)
    args = parser.parse_args()

    out = Path(args.out)
    corpus = out / "corpus"
    t0 = time.time()
    synthesize_corpus(seed=args.seed, n_pairs=args.pairs, size=args.size, out_dir=corpus)
    stream = list(load_corpus(corpus, "train"))
    vocab = build_vocabulary(s for _, _, rec in stream for s in rec.sentences)
    print(f"{len(stream)} train pairs, vocab {len(vocab)} ({time.time() - t0:.1f}s)")

    torch.manual_seed(args.seed)
    model = ChangeCaptioner(ModelConfig(vocab_size=len(vocab), **TINY))
    items = build_items(stream, vocab, model.cfg.max_len)
    log = overfit_steps(model, items, steps=args.steps, lr=args.lr, seed=args.seed)
    print(
        f"{args.steps} steps in {time.time() - t0:.1f}s; "
        f"l_det={log[-1]['l_det']:.4f} l_cap={log[-1]['l_cap']:.4f}"
    )

    mi, b4 = evaluate_model(model, items, vocab)
    cands, refs = [], []
    model.eval()
    with torch.no_grad():
        for it in items:
            ids = model.generate_ids(it.t1.unsqueeze(0), it.t2.unsqueeze(0))[0]
            cands.append(" ".join(vocab.decode(ids)))
            refs.append(it.raw_sentences)
    b1 = bleu(cands, refs)[0]
    print(f"train MIoU={mi:.4f} BLEU-1={b1:.4f} BLEU-4={b4:.4f}")

    ckpt = save_checkpoint(out / "overfit.pt", model, vocab)
    print(f"checkpoint: {ckpt}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
