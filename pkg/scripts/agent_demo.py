#!/usr/bin/env python3
"""Drive the agent against a checkpoint with a scripted mock LLM.

Runs the classic request: detect changes, recolor buildings green and
roads blue, count changed buildings. Expects a checkpoint produced by
scripts/overfit_demo.py (or any `mci train` output).

Usage: python3 scripts/agent_demo.py --checkpoint runs/overfit/overfit.pt \
    --corpus runs/overfit/corpus [--workdir runs/agent]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from mci.agent.core import Agent
from mci.agent.llm import MockLlmClient
from mci.agent.session import AgentSession
from mci.agent.tools import store_pair
from mci.artifacts import ArtifactStore
from mci.checkpoint import load_checkpoint

PLAN = """\
Here is my plan:
```plan
[
  {"id": "mask", "tool": "detect_changes", "args": {"pair_ref": {"$ref": "pair"}}},
  {"id": "vis", "tool": "recolor_mask",
   "args": {"mask_ref": {"$ref": "mask"}, "mapping": "building:green,road:blue"}},
  {"id": "n", "tool": "count_objects",
   "args": {"mask_ref": {"$ref": "mask"}, "class": "building"}},
  {"respond": "Detected the changes. {n} buildings changed; see the recolored map."}
]
```
"""


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--checkpoint", default="runs/overfit/overfit.pt")
    parser.add_argument("--corpus", default="runs/overfit/corpus")
    parser.add_argument("--workdir", default="runs/agent")
    args = parser.parse_args()

    model, vocab = load_checkpoint(args.checkpoint)
    store = ArtifactStore(Path(args.workdir) / "artifacts")
    llm = MockLlmClient([{"request": "buildings", "response": PLAN}])
    agent = Agent(store=store, model=model, vocab=vocab, llm=llm)

    pair_dir = Path(args.corpus) / "train"
    name = sorted(p.name for p in (pair_dir / "A").glob("*.png"))[0]
    t1_png = (pair_dir / "A" / name).read_bytes()
    t2_png = (pair_dir / "B" / name).read_bytes()
    session = AgentSession()
    session.pair_ref, session.t1_ref, session.t2_ref = store_pair(store, t1_png, t2_png)
    print(f"pair {name} -> {session.pair_ref}")

    reply = agent.handle(
        session,
        "Detect the changes, display building areas in green and road areas "
        "in blue, and count the changed buildings.",
    )
    print(f"reply: {reply.text}")
    for art in reply.artifacts:
        print(f"  artifact {art['kind']}: {art['ref']}" +
              (f" ({art['caption']})" if "caption" in art else ""))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
