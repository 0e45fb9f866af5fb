"""Acceptance suite: one test per headline guarantee.

Every check here is scored against the deliberately naive oracles in
tests/oracles.py (stack flood fill, list-based n-gram counting, float64
central differences) or against closed-form identities, never against the
library's own fast paths. The terminal summary hook in conftest prints one
PASS/FAIL line per test in this file.
"""

from __future__ import annotations

import io
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient
from PIL import Image

from mci.agent.core import Agent
from mci.agent.llm import MockLlmClient
from mci.agent.session import AgentSession
from mci.agent.tools import store_pair
from mci.artifacts import ArtifactStore
from mci.checkpoint import checkpoint_id, load_checkpoint
from mci.data.codec import BUILDING, ROAD, decode_mask, load_mask
from mci.data.corpus import SPLITS, load_corpus
from mci.data.stats import compute_stats, count_components
from mci.data.vocab import build_vocabulary
from mci.gateway.app import MEDIA_TYPES, create_app
from mci.gateway.config import ServiceConfig
from mci.losses import loss_cap, loss_det, loss_total
from mci.metrics import bleu, cider_d, meteor_lite, miou, rouge_l
from mci.models.bi3 import (
    Bi3Config,
    Bi3Layer,
    DifferenceFusionAttention,
    LocalPerceptionEnhance,
)
from mci.models.captioning import DomainBridge
from mci.models.detection import ConvBitemporalFusion
from mci.models.full import ModelConfig, build_model

from .conftest import DEMO_PLAN, png_bytes
from .oracles import (
    bleu_oracle,
    cider_d_oracle,
    fd_gradients,
    flood_fill_count,
    meteor_lite_oracle,
    miou_oracle,
    rel_err,
    rouge_l_oracle,
)

# ---------------------------------------------------------------------------
# 1. multi-task loss balancing


def test_c01_loss_balance_identity(overfit_run):
    """Each logged total equals the number of active terms to 1e-6, and the
    total's parameter gradient is each term's raw gradient divided by the
    term's (detached) value."""
    log = overfit_run.step_log
    assert len(log) == 200
    # both raw terms stayed positive, so the identity was never vacuous
    assert all(e["l_det"] > 0.0 and e["l_cap"] > 0.0 for e in log)
    worst = max(abs(e["l_total"] - 2.0) for e in log)
    assert worst <= 1e-6, f"worst |l_total - 2| = {worst:.3e}"

    torch.manual_seed(31)
    vocab = build_vocabulary(["a road appears .", "two buildings are removed ."])
    model = build_model(
        ModelConfig(
            vocab_size=len(vocab),
            channels=(4, 8, 12, 16),
            blocks_per_stage=1,
            bi3_layers=1,
            embed_dim=16,
            decoder_layers=1,
            heads=4,
            max_len=24,
            max_grid=8,
        )
    )
    t1 = torch.randn(2, 3, 32, 32)
    t2 = torch.randn(2, 3, 32, 32)
    masks = torch.randint(0, 3, (2, 32, 32))
    ids = torch.tensor(
        [vocab.encode("a road appears ."), vocab.encode("two buildings are removed")]
    )
    det_logits, cap_logits, targets = model(t1, t2, ids)
    ld = loss_det(det_logits, masks)
    lc = loss_cap(cap_logits, targets)
    ld_val, lc_val = float(ld.detach()), float(lc.detach())

    names = [n for n, _ in model.named_parameters()]
    params = [p for _, p in model.named_parameters()]
    g_det = torch.autograd.grad(ld, params, retain_graph=True, allow_unused=True)
    g_cap = torch.autograd.grad(lc, params, retain_graph=True, allow_unused=True)
    g_tot = torch.autograd.grad(loss_total(ld, lc), params, allow_unused=True)

    def flat(grads, idx):
        return torch.cat(
            [
                (grads[i] if grads[i] is not None else torch.zeros_like(params[i])).reshape(-1)
                for i in idx
            ]
        )

    everything = list(range(len(params)))
    expected = flat(g_det, everything) / ld_val + flat(g_cap, everything) / lc_val
    assert rel_err(flat(g_tot, everything), expected) < 1e-4

    # on branch-only parameters the per-term scaling is visible in isolation
    for prefix, grads, value in (
        ("detection.", g_det, ld_val),
        ("caption.", g_cap, lc_val),
    ):
        idx = [i for i, n in enumerate(names) if n.startswith(prefix)]
        assert idx, prefix
        err = rel_err(flat(g_tot, idx), flat(grads, idx) / value)
        assert err < 1e-4, f"{prefix} rel err {err:.3e}"


# ---------------------------------------------------------------------------
# 2. attention on an unchanged scene


def test_c02_gdfa_zero_difference_constancy():
    """Identical inputs collapse the attention output to a token-constant map;
    a single-token sequence returns the value projection bit-exactly."""
    cases = [(8, 8, 9), (16, 8, 25), (32, 32, 64), (48, 16, 16), (8, 4, 49)]
    for seed, (dim, attn_dim, n) in enumerate(cases):
        torch.manual_seed(seed)
        attn = DifferenceFusionAttention(dim, attn_dim).eval()
        x = torch.randn(2, n, dim)
        with torch.no_grad():
            out = attn(x, x)
        assert out.shape == (2, n, attn_dim)
        var = out.var(dim=1, unbiased=False)
        assert float(var.max()) < 1e-10, (dim, attn_dim, n, float(var.max()))

    torch.manual_seed(99)
    attn = DifferenceFusionAttention(12, 6).eval()
    anchor = torch.randn(3, 1, 12)
    other = torch.randn(3, 1, 12)
    with torch.no_grad():
        out = attn(anchor, other)
        expected = attn.w_v(attn.w_d((other - anchor) * anchor))
    assert torch.equal(out, expected)


# ---------------------------------------------------------------------------
# 3. local perception enhancement


def test_c03_lpe_residual_nonnegativity():
    """lpe(x) - x >= 0 elementwise over 1000 random inputs, no violations."""
    dims = [3, 4, 6, 8, 5, 7, 12, 16, 2, 10]
    violations = 0
    total = 0
    for seed, dim in enumerate(dims):
        torch.manual_seed(seed)
        lpe = LocalPerceptionEnhance(dim)
        if seed % 2:
            lpe.eval()
        for b in range(10):
            scale = 10.0 ** ((b % 5) - 2)
            x = torch.randn(10, dim, 8, 8) * scale
            with torch.no_grad():
                out = lpe(x)
            violations += int(((out - x) < 0).sum())
            total += x.shape[0]
    assert total == 1000
    assert violations == 0


# ---------------------------------------------------------------------------
# 4. finite-difference gradient checks


def _max_fd_err(module: torch.nn.Module, inputs: list[torch.Tensor]) -> float:
    """Largest relative error between autograd and float64 central FD over
    all inputs and parameters of a module."""
    module = module.double().eval()
    with torch.no_grad():
        first = module(*inputs)
    outs = first if isinstance(first, tuple) else (first,)
    probes = [torch.randn_like(o) for o in outs]

    def fn():
        got = module(*inputs)
        got = got if isinstance(got, tuple) else (got,)
        return sum((g * p).sum() for g, p in zip(got, probes))

    tensors = list(inputs) + list(module.parameters())
    fd = fd_gradients(fn, tensors, eps=1e-6)
    fn().backward()
    got, want, errs = [], [], []
    for t, g in zip(tensors, fd):
        grad = t.grad if t.grad is not None else torch.zeros_like(t)
        got.append(grad.reshape(-1))
        want.append(g.reshape(-1))
        # below ~1e-6 both sides are dominated by FD roundoff (a key bias,
        # say, has an exactly zero gradient through the softmax shift)
        if max(float(grad.norm()), float(g.norm())) > 1e-6:
            errs.append(rel_err(grad, g))
    errs.append(rel_err(torch.cat(got), torch.cat(want)))
    return max(errs)


def _leaf(*shape: int) -> torch.Tensor:
    return torch.randn(*shape, dtype=torch.float64, requires_grad=True)


def test_c04_gradient_checks():
    """lpe, gdfa, bi3 layer, conv fusion, and the domain bridge all pass a
    float64 central-difference check at rel err < 1e-4 in under two minutes."""
    t0 = time.monotonic()
    report = {}

    torch.manual_seed(1)
    report["lpe"] = _max_fd_err(LocalPerceptionEnhance(5), [_leaf(1, 5, 4, 4)])

    torch.manual_seed(2)
    report["gdfa"] = _max_fd_err(
        DifferenceFusionAttention(5, 4), [_leaf(1, 4, 5), _leaf(1, 4, 5)]
    )

    torch.manual_seed(3)
    layer = Bi3Layer(Bi3Config(dim=6, attn_dim=4, mlp_ratio=2.0, num_layers=1))
    report["bi3_layer"] = _max_fd_err(layer, [_leaf(1, 6, 3, 3), _leaf(1, 6, 3, 3)])

    torch.manual_seed(4)
    report["cbf"] = _max_fd_err(
        ConvBitemporalFusion(5), [_leaf(1, 5, 4, 4), _leaf(1, 5, 4, 4)]
    )

    torch.manual_seed(5)
    report["bridge"] = _max_fd_err(
        DomainBridge(5, 6), [_leaf(1, 5, 4, 4), _leaf(1, 5, 4, 4)]
    )

    elapsed = time.monotonic() - t0
    assert elapsed < 120.0, f"gradient checks took {elapsed:.1f}s"
    for name, err in report.items():
        assert err < 1e-4, f"{name}: rel err {err:.3e}"


# ---------------------------------------------------------------------------
# 5. metric oracle equivalence

CANDS = [
    "a new road cuts across the northern fields.",
    "two small buildings appear near the bend",
    "the dirt track was replaced by a paved road .",
    "many houses are built along the road and a house gets a garden",
    "nothing has changed in this scene",
]
REFS = [
    [
        "a road appears across the northern fields.",
        "a new road crosses the fields in the north",
        "the north fields gain a long road",
    ],
    [
        "two buildings appear near the river bend",
        "a pair of small houses shows up by the bend",
        "two small buildings are erected close to the bend",
    ],
    [
        "a paved road replaces the dirt track.",
        "the track is now a paved road",
        "pavement covers the old dirt track",
    ],
    [
        "houses line the road and one house gains a garden",
        "many new houses stand along the road",
        "rows of houses appear beside the road and a garden is added",
    ],
    [
        "the scene is unchanged",
        "no change can be seen",
        "everything stays the same",
    ],
]


def test_c05_metric_oracle_equivalence():
    """Engine metrics match the brute-force oracles to 1e-6 on a five-image
    toy corpus; the trivial identities hold exactly."""
    rng = np.random.default_rng(17)
    preds = [rng.integers(0, 3, size=(21, 17)) for _ in range(5)]
    gts = [rng.integers(0, 3, size=(21, 17)) for _ in range(5)]
    assert abs(miou(preds, gts) - miou_oracle(preds, gts)) < 1e-6

    got = bleu(CANDS, REFS)
    want = bleu_oracle(CANDS, REFS)
    assert len(got) == 4
    assert max(abs(a - b) for a, b in zip(got, want)) < 1e-6

    assert abs(cider_d(CANDS, REFS) - cider_d_oracle(CANDS, REFS)) < 1e-6

    for cand, group in zip(CANDS, REFS):
        assert abs(rouge_l(cand, group) - rouge_l_oracle(cand, group)) < 1e-6
        assert abs(meteor_lite(cand, group) - meteor_lite_oracle(cand, group)) < 1e-6

    # trivial identities, exact
    assert miou([g.copy() for g in gts], gts) == 1.0
    sent = "the river bank erodes near the old bridge ."
    assert bleu([sent], [[sent]]) == [1.0, 1.0, 1.0, 1.0]
    assert rouge_l(sent, [sent]) == 1.0
    pair = ["alpha beta gamma delta", "north canal gains water"]
    assert cider_d(pair, [[pair[0]], [pair[1]]]) == 10.0


# ---------------------------------------------------------------------------
# 6. overfit smoke run


def test_c06_overfit_smoke(overfit_run):
    """200 fixed steps on 16 synthetic pairs reach train MIoU >= 0.90 and
    BLEU-1 >= 0.80 within the wall-clock budget."""
    assert len(overfit_run.items) == 16
    assert len(overfit_run.step_log) == 200
    assert overfit_run.miou >= 0.90, f"train MIoU {overfit_run.miou:.4f}"
    assert overfit_run.bleu1 >= 0.80, f"train BLEU-1 {overfit_run.bleu1:.4f}"
    assert overfit_run.elapsed_s <= 600.0, f"took {overfit_run.elapsed_s:.1f}s"


# ---------------------------------------------------------------------------
# 7. counting oracle


def test_c07_counting_oracle(overfit_run):
    """Component counts equal a naive flood fill on 500 random masks and the
    generator's edit log on a synthetic corpus, exactly."""
    rng = np.random.default_rng(23)
    for _ in range(500):
        h = int(rng.integers(6, 28))
        w = int(rng.integers(6, 28))
        style = rng.random()
        if style < 0.1:
            labels = np.zeros((h, w), dtype=np.int64)  # empty
        elif style < 0.2:
            labels = np.full((h, w), int(rng.integers(1, 3)), dtype=np.int64)
        else:
            p_bg = float(rng.uniform(0.3, 0.9))
            rest = (1.0 - p_bg) * rng.dirichlet([1.0, 1.0])
            labels = rng.choice(3, size=(h, w), p=[p_bg, rest[0], rest[1]])
        for cls in (BUILDING, ROAD):
            assert count_components(labels, cls) == flood_fill_count(labels, cls)

    checked = 0
    for entry in overfit_run.log["pairs"]:
        path = overfit_run.corpus / entry["split"] / "label" / f"{entry['pair_id']}.png"
        labels = load_mask(path)
        assert count_components(labels, BUILDING) == entry["n_buildings"]
        assert count_components(labels, ROAD) == entry["n_roads"]
        assert flood_fill_count(labels, BUILDING) == entry["n_buildings"]
        assert flood_fill_count(labels, ROAD) == entry["n_roads"]
        checked += 1
    assert checked == overfit_run.log["n_pairs"]


# ---------------------------------------------------------------------------
# 8. real-corpus cross-check (optional, needs a local dataset)

_LEVIR = os.environ.get("MCI_LEVIR_ROOT", "")


@pytest.mark.skipif(
    not _LEVIR or not Path(_LEVIR).is_dir(),
    reason="MCI_LEVIR_ROOT not set to a dataset directory",
)
def test_c08_real_corpus_stats():
    """Train-split instance counts land within 5% of the published tallies
    and the corpus holds exactly 10077 pairs."""
    root = Path(_LEVIR)
    seen = dict.fromkeys(SPLITS, 0)

    def masks_of(split):
        for _, mask, _ in load_corpus(root, split):
            seen[split] += 1
            yield mask.labels

    stats = compute_stats(masks_of("train"))
    for split in SPLITS:
        if split != "train":
            for _ in masks_of(split):
                pass
    assert sum(seen.values()) == 10077
    buildings = stats.instances["building"]
    roads = stats.instances["road"]
    assert abs(buildings - 26155) <= 0.05 * 26155, f"buildings {buildings}"
    assert abs(roads - 3457) <= 0.05 * 3457, f"roads {roads}"


# ---------------------------------------------------------------------------
# 9. deterministic agent replay


def _first_changed_train_pair(overfit_run) -> dict:
    for entry in overfit_run.log["pairs"]:
        if entry["split"] == "train" and entry["n_buildings"] >= 1:
            return entry
    raise AssertionError("corpus has no changed train pair")


def _replay(overfit_run, root: Path, entry: dict):
    model, vocab = load_checkpoint(overfit_run.checkpoint)
    store = ArtifactStore(root / "store")
    t1 = (overfit_run.corpus / entry["split"] / "A" / f"{entry['pair_id']}.png").read_bytes()
    t2 = (overfit_run.corpus / entry["split"] / "B" / f"{entry['pair_id']}.png").read_bytes()
    pair_ref, t1_ref, t2_ref = store_pair(store, t1, t2)
    session = AgentSession(pair_ref=pair_ref, t1_ref=t1_ref, t2_ref=t2_ref)
    agent = Agent(store, model, vocab, MockLlmClient([{"response": DEMO_PLAN}]))
    reply = agent.handle(
        session, "detect changes, recolor buildings green and roads blue, count buildings"
    )
    return store, reply


def test_c09_agent_replay(overfit_run, tmp_path):
    """The canned request yields a valid plan, a recolored artifact, and a
    count that matches a flood fill of the produced mask; two replays from
    the same checkpoint are bit-identical."""
    entry = _first_changed_train_pair(overfit_run)
    store_a, reply_a = _replay(overfit_run, tmp_path / "a", entry)
    store_b, reply_b = _replay(overfit_run, tmp_path / "b", entry)

    assert reply_a.plan is not None
    assert [s.tool for s in reply_a.plan.steps] == [
        "detect_changes",
        "recolor_mask",
        "count_objects",
    ]
    captions = [a["caption"] for a in reply_a.artifacts]
    assert "change mask" in captions
    assert any(c.startswith("recolored mask") for c in captions)

    mask_png, kind = store_a.get(reply_a.results["mask"])
    assert kind == "png"
    produced = decode_mask(np.asarray(Image.open(io.BytesIO(mask_png)).convert("RGB")))
    assert reply_a.results["n"] == flood_fill_count(produced, BUILDING)
    assert str(reply_a.results["n"]) in reply_a.text

    assert reply_a.text == reply_b.text
    assert reply_a.results == reply_b.results
    refs_a = [a["ref"] for a in reply_a.artifacts]
    refs_b = [b["ref"] for b in reply_b.artifacts]
    assert refs_a == refs_b
    for ref in refs_a:
        assert store_a.get(ref) == store_b.get(ref)


# ---------------------------------------------------------------------------
# 10. gateway contract


def _gateway(overfit_run, root: Path, responses, llm=None) -> TestClient:
    config = ServiceConfig(
        checkpoint=str(overfit_run.checkpoint),
        artifact_dir=str(root / "artifacts"),
        journal_dir=str(root / "journals"),
    )
    if llm is None:
        llm = MockLlmClient([{"response": r} for r in responses])
    return TestClient(create_app(config, llm=llm))


def _upload(client: TestClient, sid: str, seed: int = 5, size: int = 64) -> dict:
    rng = np.random.default_rng(seed)
    files = {
        "t1": ("t1.png", png_bytes(rng.integers(0, 256, (size, size, 3), dtype=np.uint8))),
        "t2": ("t2.png", png_bytes(rng.integers(0, 256, (size, size, 3), dtype=np.uint8))),
    }
    r = client.post(f"/api/sessions/{sid}/pair", files=files)
    assert r.status_code == 200
    return r.json()


def test_c10_gateway_contract(overfit_run, tmp_path):
    """Every documented route answers with the documented status codes, and
    each artifact reference a reply mentions can be fetched back."""
    client = _gateway(overfit_run, tmp_path / "good", [DEMO_PLAN])

    health = client.get("/api/health")
    assert health.status_code == 200
    assert health.json() == {
        "status": "ok",
        "checkpoint_id": checkpoint_id(overfit_run.checkpoint),
    }

    sid = client.post("/api/sessions").json()["session_id"]
    upload = _upload(client, sid)
    assert set(upload) == {"pair_ref", "t1_ref", "t2_ref"}

    reply = client.post(f"/api/sessions/{sid}/messages", json={"text": "recolor the changes"})
    assert reply.status_code == 200
    body = reply.json()
    assert set(body) == {"reply", "artifacts"}
    assert body["artifacts"], "plan produced no artifacts"
    for entry in body["artifacts"]:
        got = client.get(f"/api/artifacts/{entry['ref']}")
        assert got.status_code == 200
        assert got.headers["content-type"].startswith(MEDIA_TYPES[entry["kind"]])
    assert client.get(f"/api/artifacts/{upload['t1_ref']}").status_code == 200

    journal = client.get(f"/api/sessions/{sid}/journal")
    assert journal.status_code == 200
    events = [json.loads(line)["event"] for line in journal.text.splitlines()]
    assert events == ["session_created", "pair_uploaded", "message", "message"]

    # 400: malformed uploads
    bad = _gateway(overfit_run, tmp_path / "bad", [])
    bad_sid = bad.post("/api/sessions").json()["session_id"]
    r = bad.post(
        f"/api/sessions/{bad_sid}/pair",
        files={"t1": ("t1.png", b"not a png"), "t2": ("t2.png", b"also not")},
    )
    assert r.status_code == 400
    rng = np.random.default_rng(0)
    r = bad.post(
        f"/api/sessions/{bad_sid}/pair",
        files={
            "t1": ("t1.png", png_bytes(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))),
            "t2": ("t2.png", png_bytes(rng.integers(0, 256, (48, 48, 3), dtype=np.uint8))),
        },
    )
    assert r.status_code == 400
    assert "differ in size" in r.json()["detail"]

    # 404: unknown session and artifact
    assert bad.post("/api/sessions/nope/messages", json={"text": "hi"}).status_code == 404
    assert bad.get("/api/artifacts/deadbeef").status_code == 404
    assert bad.get("/api/sessions/nope/journal").status_code == 404

    # 422: body validation, planning failure, execution failure
    assert bad.post(f"/api/sessions/{bad_sid}/messages", json={"words": "hi"}).status_code == 422

    broken = '```plan\n{"not": "an array"}\n```'
    plan_fail = _gateway(overfit_run, tmp_path / "plan", [broken, broken])
    pf_sid = plan_fail.post("/api/sessions").json()["session_id"]
    r = plan_fail.post(f"/api/sessions/{pf_sid}/messages", json={"text": "go"})
    assert r.status_code == 422
    detail = r.json()["detail"]
    assert detail["error"] == "planning_failure"
    assert len(detail["diagnostics"]) == 2

    needs_pair = (
        '```plan\n[{"id": "m", "tool": "detect_changes",'
        ' "args": {"pair_ref": {"$ref": "pair"}}}]\n```'
    )
    exec_fail = _gateway(overfit_run, tmp_path / "exec", [needs_pair])
    ef_sid = exec_fail.post("/api/sessions").json()["session_id"]
    r = exec_fail.post(f"/api/sessions/{ef_sid}/messages", json={"text": "detect"})
    assert r.status_code == 422
    detail = r.json()["detail"]
    assert detail["error"] == "execution_failure"
    assert detail["step_id"] == "m"

    # 503: the model backend is unreachable
    gone = _gateway(overfit_run, tmp_path / "gone", [])
    go_sid = gone.post("/api/sessions").json()["session_id"]
    assert gone.post(f"/api/sessions/{go_sid}/messages", json={"text": "hi"}).status_code == 503
