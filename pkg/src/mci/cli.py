"""Command line entry point: synth / train / eval / serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def _cmd_synth(args: argparse.Namespace) -> int:
    from .data.synth import synthesize_corpus

    summary = synthesize_corpus(
        seed=args.seed, n_pairs=args.pairs, size=args.size, out_dir=args.out
    )
    print(f"wrote {summary['n_pairs']} pairs to {args.out}")
    splits: dict[str, int] = {}
    for pair in summary["pairs"]:
        splits[pair["split"]] = splits.get(pair["split"], 0) + 1
    for split in ("train", "val", "test"):
        print(f"  {split}: {splits.get(split, 0)}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    from .trainer import TrainConfig, run_schedule

    overrides = {}
    train_kwargs = {}
    if args.config:
        with open(args.config) as fh:
            payload = json.load(fh)
        overrides = payload.get("model", {})
        train_kwargs = payload.get("train", {})
    cfg = TrainConfig(**train_kwargs)
    out = run_schedule(args.data, overrides, cfg, args.out)
    last = out["history"][-1]
    print(
        f"finished epoch {last['epoch']}: miou={last['miou']:.4f} "
        f"bleu4={last['bleu4']:.4f}"
    )
    for name, path in out["paths"].items():
        print(f"  {name}: {path}")
    return 0


def _load_caption_file(path: str) -> dict[str, list[str]]:
    with open(path) as fh:
        payload = json.load(fh)
    if isinstance(payload, dict) and "images" in payload:
        return {
            entry["filename"]: [s["raw"] for s in entry["sentences"]]
            for entry in payload["images"]
        }
    if isinstance(payload, dict):
        return {
            k: (v if isinstance(v, list) else [v]) for k, v in payload.items()
        }
    raise ValueError(f"unrecognized captions file format: {path}")


def _cmd_eval(args: argparse.Namespace) -> int:
    from .data.codec import load_mask
    from .metrics import evaluate_captions, miou

    report = {}
    if args.pred_dir and args.gt_dir:
        pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
        names = sorted(p.name for p in gt_dir.glob("*.png"))
        if not names:
            print(f"no ground-truth masks in {gt_dir}", file=sys.stderr)
            return 2
        preds, gts = [], []
        for name in names:
            pred_path = pred_dir / name
            if not pred_path.exists():
                print(f"missing prediction {pred_path}", file=sys.stderr)
                return 2
            preds.append(load_mask(pred_path))
            gts.append(load_mask(gt_dir / name))
        report["miou"] = miou(preds, gts)
    if args.pred_captions and args.ref_captions:
        preds = _load_caption_file(args.pred_captions)
        refs = _load_caption_file(args.ref_captions)
        missing = sorted(set(refs) - set(preds))
        if missing:
            print(f"missing predictions for {missing[:5]}", file=sys.stderr)
            return 2
        keys = sorted(refs)
        caption_report = evaluate_captions(
            [preds[k][0] for k in keys], [refs[k] for k in keys]
        ).to_dict()
        caption_report.pop("miou")
        report.update(caption_report)
    if not report:
        print("nothing to evaluate: pass mask dirs and/or caption files", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")
        print(f"report written to {args.report}", file=sys.stderr)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .gateway.app import create_app
    from .gateway.config import ServiceConfig

    config = ServiceConfig.from_json(args.config)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mci", description="bi-temporal change interpretation toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic bi-temporal corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=16)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="run the two-phase training schedule")
    p.add_argument("--data", required=True, help="corpus root directory")
    p.add_argument("--config", help="JSON with 'model' and 'train' sections")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred-dir", help="directory of predicted mask PNGs")
    p.add_argument("--gt-dir", help="directory of ground-truth mask PNGs")
    p.add_argument("--pred-captions", help="JSON file of predicted captions")
    p.add_argument("--ref-captions", help="JSON file of reference captions")
    p.add_argument("--report", help="write the report JSON here")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("serve", help="start the HTTP gateway")
    p.add_argument("--config", required=True, help="service config JSON")
    p.set_defaults(fn=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    np.seterr(all="warn")
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
