"""Tool registry: the concrete capabilities the planner may invoke.

Every tool is a pure function of the artifact store plus its arguments;
results are new artifacts or plain values, never mutations.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from PIL import Image

from ..artifacts import ArtifactStore
from ..data.codec import CLASS_COLORS, CLASS_NAMES, NUM_CLASSES, class_id, decode_mask, encode_mask
from ..data.stats import count_components
from ..data.vocab import Vocabulary
from ..models.full import ChangeCaptioner

ARG_TYPES = ("string", "int", "real", "image_ref", "mask_ref", "pair_ref")

COLOR_TABLE = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
    "orange": (255, 165, 0),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
    "gray": (128, 128, 128),
}


class ToolError(Exception):
    def __init__(self, message: str, tool: str | None = None):
        self.tool = tool
        super().__init__(message if tool is None else f"[{tool}] {message}")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    params: tuple[tuple[str, str], ...]  # (param name, type)
    result: str

    def signature(self) -> str:
        args = ", ".join(f"{n}: {t}" for n, t in self.params)
        return f"{self.name}({args}) -> {self.result}"


@dataclass
class ToolContext:
    """Everything a tool invocation may touch."""

    store: ArtifactStore
    model: ChangeCaptioner
    vocab: Vocabulary
    resolution_m_per_px: float = 0.5
    bindings: dict[str, str] = field(default_factory=dict)  # builtin name -> ref
    new_artifacts: list[dict] = field(default_factory=list)

    def record(self, ref: str, kind: str, caption: str | None = None) -> str:
        entry: dict = {"ref": ref, "kind": kind}
        if caption is not None:
            entry["caption"] = caption
        self.new_artifacts.append(entry)
        return ref

    def drain_artifacts(self) -> list[dict]:
        out = self.new_artifacts
        self.new_artifacts = []
        return out

    # -- shared loading helpers -------------------------------------------

    def load_image(self, ref: str, tool: str) -> np.ndarray:
        try:
            data, kind = self.store.get(ref)
        except KeyError:
            raise ToolError(f"unknown artifact {ref!r}", tool) from None
        if kind != "png":
            raise ToolError(f"artifact {ref!r} is {kind}, expected png", tool)
        return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))

    def load_mask(self, ref: str, tool: str) -> np.ndarray:
        rgb = self.load_image(ref, tool)
        try:
            return decode_mask(rgb)
        except Exception as exc:
            raise ToolError(f"artifact {ref!r} is not a change mask: {exc}", tool) from None

    def load_pair(self, ref: str, tool: str) -> tuple[np.ndarray, np.ndarray]:
        try:
            data, kind = self.store.get(ref)
        except KeyError:
            raise ToolError(f"unknown pair {ref!r}", tool) from None
        if kind != "json":
            raise ToolError(f"artifact {ref!r} is {kind}, expected a pair record", tool)
        payload = json.loads(data)
        if not isinstance(payload, dict) or "t1" not in payload or "t2" not in payload:
            raise ToolError(f"artifact {ref!r} is not a pair record", tool)
        t1 = self.load_image(payload["t1"], tool)
        t2 = self.load_image(payload["t2"], tool)
        if t1.shape != t2.shape:
            raise ToolError("pair images differ in size", tool)
        return t1, t2


def _png_bytes(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(rgb.astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def store_pair(store: ArtifactStore, t1_png: bytes, t2_png: bytes) -> tuple[str, str, str]:
    """Persist a pair upload; returns (pair_ref, t1_ref, t2_ref)."""
    t1_ref = store.put(t1_png, "png")
    t2_ref = store.put(t2_png, "png")
    record = json.dumps({"t1": t1_ref, "t2": t2_ref}, sort_keys=True).encode()
    return store.put(record, "json"), t1_ref, t2_ref


def parse_mapping(mapping: str, tool: str) -> dict[int, tuple[int, int, int]]:
    """'building:green,road:blue' -> {class_id: rgb}."""
    out: dict[int, tuple[int, int, int]] = {}
    for part in mapping.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ToolError(f"bad mapping entry {part!r}, expected class:color", tool)
        cls_name, color_name = (p.strip().lower() for p in part.split(":", 1))
        try:
            cid = class_id(cls_name)
        except ValueError:
            raise ToolError(f"unknown class {cls_name!r}", tool) from None
        if color_name not in COLOR_TABLE:
            raise ToolError(
                f"unknown color {color_name!r}; known: {', '.join(sorted(COLOR_TABLE))}", tool
            )
        out[cid] = COLOR_TABLE[color_name]
    if not out:
        raise ToolError("empty recolor mapping", tool)
    return out


def build_registry(ctx: ToolContext) -> dict[str, tuple[ToolSpec, Callable]]:
    def tool_load_pair(pair_ref: str) -> str:
        ctx.load_pair(pair_ref, "load_pair")
        return pair_ref

    def tool_detect(pair_ref: str) -> str:
        t1, t2 = ctx.load_pair(pair_ref, "detect_changes")
        mask = ctx.model.predict_mask(t1, t2)
        ref = ctx.store.put(_png_bytes(encode_mask(mask)), "png")
        return ctx.record(ref, "png", caption="change mask")

    def tool_caption(pair_ref: str) -> str:
        t1, t2 = ctx.load_pair(pair_ref, "caption_changes")
        sentence = ctx.model.predict_caption(t1, t2, ctx.vocab)
        ref = ctx.store.put(sentence.encode(), "txt")
        ctx.record(ref, "txt", caption="change caption")
        return sentence

    def tool_count(mask_ref: str, cls: str) -> int:
        labels = ctx.load_mask(mask_ref, "count_objects")
        try:
            cid = class_id(cls.strip().lower())
        except ValueError:
            raise ToolError(f"unknown class {cls!r}", "count_objects") from None
        return count_components(labels, cid)

    def tool_recolor(mask_ref: str, mapping: str) -> str:
        labels = ctx.load_mask(mask_ref, "recolor_mask")
        colors = parse_mapping(mapping, "recolor_mask")
        rgb = encode_mask(labels).copy()
        for cid, color in colors.items():
            rgb[labels == cid] = color
        ref = ctx.store.put(_png_bytes(rgb), "png")
        return ctx.record(ref, "png", caption=f"recolored mask ({mapping})")

    def tool_overlay(mask_ref: str, image_ref: str, alpha: float) -> str:
        if not 0.0 <= alpha <= 1.0:
            raise ToolError(f"alpha must be in [0, 1], got {alpha}", "overlay")
        labels = ctx.load_mask(mask_ref, "overlay")
        base = ctx.load_image(image_ref, "overlay")
        if base.shape[:2] != labels.shape:
            raise ToolError("mask and image sizes differ", "overlay")
        out = base.astype(np.float64)
        for cid in range(1, NUM_CLASSES):
            sel = labels == cid
            color = np.array(CLASS_COLORS[cid], dtype=np.float64)
            out[sel] = (1 - alpha) * out[sel] + alpha * color
        ref = ctx.store.put(_png_bytes(np.round(out).astype(np.uint8)), "png")
        return ctx.record(ref, "png", caption=f"overlay (alpha={alpha})")

    def tool_area(mask_ref: str) -> str:
        labels = ctx.load_mask(mask_ref, "area_stats")
        res = ctx.resolution_m_per_px
        classes = {}
        for cid, name in enumerate(CLASS_NAMES):
            pixels = int((labels == cid).sum())
            classes[name] = {"pixels": pixels, "area_m2": pixels * res * res}
        payload = json.dumps(
            {"resolution_m_per_px": res, "classes": classes}, sort_keys=True
        )
        ref = ctx.store.put(payload.encode(), "json")
        ctx.record(ref, "json", caption="area statistics")
        return payload

    entries = [
        (
            ToolSpec(
                "load_pair",
                "Validate and bind an uploaded bi-temporal image pair.",
                (("pair_ref", "pair_ref"),),
                "pair_ref",
            ),
            tool_load_pair,
        ),
        (
            ToolSpec(
                "detect_changes",
                "Run change detection on a pair; returns a change-mask artifact.",
                (("pair_ref", "pair_ref"),),
                "mask_ref",
            ),
            tool_detect,
        ),
        (
            ToolSpec(
                "caption_changes",
                "Describe the changes between the pair in one sentence.",
                (("pair_ref", "pair_ref"),),
                "string",
            ),
            tool_caption,
        ),
        (
            ToolSpec(
                "count_objects",
                "Count connected changed objects of one class (building or road) in a mask.",
                (("mask_ref", "mask_ref"), ("class", "string")),
                "int",
            ),
            tool_count,
        ),
        (
            ToolSpec(
                "recolor_mask",
                "Render a mask with custom class colors, e.g. 'building:green,road:blue'.",
                (("mask_ref", "mask_ref"), ("mapping", "string")),
                "image_ref",
            ),
            tool_recolor,
        ),
        (
            ToolSpec(
                "overlay",
                "Blend the changed regions of a mask over an image at the given opacity.",
                (("mask_ref", "mask_ref"), ("image_ref", "image_ref"), ("alpha", "real")),
                "image_ref",
            ),
            tool_overlay,
        ),
        (
            ToolSpec(
                "area_stats",
                "Per-class changed pixel counts and areas in square meters, as JSON.",
                (("mask_ref", "mask_ref"),),
                "string",
            ),
            tool_area,
        ),
    ]
    return {spec.name: (spec, fn) for spec, fn in entries}
