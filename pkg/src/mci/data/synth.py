"""Desk-scale synthetic bi-temporal corpus generator.

Each pair starts from a smooth terrain image; the second (or, for
removals, the first) frame gets rectangles (buildings) and thick
polylines (roads) painted on. The mask marks exactly the painted pixels,
edit regions are kept mutually separated so every edit is one 8-connected
component, and five template captions are derived from the edit log.

Everything is driven by a single numpy Generator, so a given seed yields
byte-identical files on re-run.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .codec import BACKGROUND, BUILDING, ROAD, save_mask

MIN_SIZE = 64

# keep ≥2px gaps so 8-connectivity never merges two edits
_SEPARATION = np.ones((5, 5), dtype=bool)

_BUILDING_COLORS = [
    (178, 62, 48),    # red roof
    (152, 152, 158),  # gray
    (199, 199, 204),  # light gray
    (96, 99, 112),    # dark slate
]
_ROAD_COLOR = (116, 114, 110)

_NUMBER_WORDS = {2: "two", 3: "three", 4: "four", 5: "five", 6: "six"}

_NO_CHANGE_SENTENCES = [
    "the scene is the same as before .",
    "there is no change .",
    "nothing has changed in the area .",
    "the two scenes look identical .",
    "no difference can be seen between the images .",
]


@dataclass
class EditRecord:
    class_id: int           # BUILDING or ROAD
    action: str             # "insert" or "remove"
    area: int
    bbox: tuple[int, int, int, int]   # r0, c0, r1, c1 inclusive
    centroid: tuple[float, float]


@dataclass
class PairLog:
    pair_id: str
    split: str
    n_buildings: int
    n_roads: int
    edits: list[EditRecord] = field(default_factory=list)
    sentences: list[str] = field(default_factory=list)


def _terrain(rng: np.random.Generator, size: int) -> np.ndarray:
    """Smooth green-brown base image, (size, size, 3) uint8."""
    coarse_n = max(4, size // 16)
    lo = np.array([58, 88, 46], dtype=np.float64)
    hi = np.array([112, 140, 92], dtype=np.float64)
    coarse = rng.uniform(0.0, 1.0, size=(coarse_n, coarse_n, 3)) * (hi - lo) + lo
    zoom = size / coarse_n
    img = ndimage.zoom(coarse, (zoom, zoom, 1), order=1)
    img = img[:size, :size]
    img += rng.normal(0.0, 3.0, size=img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def _building_region(rng: np.random.Generator, size: int) -> np.ndarray | None:
    h = int(rng.integers(size // 8, size // 4 + 1))
    w = int(rng.integers(size // 8, size // 4 + 1))
    if h + 4 >= size or w + 4 >= size:
        return None
    r0 = int(rng.integers(2, size - h - 2))
    c0 = int(rng.integers(2, size - w - 2))
    region = np.zeros((size, size), dtype=bool)
    region[r0 : r0 + h, c0 : c0 + w] = True
    return region


def _road_region(rng: np.random.Generator, size: int) -> np.ndarray:
    """Thick polyline crossing the image, with one bend."""
    width = max(4.0, size / 28.0)
    horizontal = bool(rng.integers(0, 2))
    a = float(rng.uniform(0.15, 0.85)) * size
    b = float(rng.uniform(0.15, 0.85)) * size
    mid = float(rng.uniform(0.3, 0.7)) * size
    if horizontal:
        pts = [(a, 0.0), ((a + b) / 2.0, mid), (b, float(size - 1))]
        pts = [(p[0], p[1]) for p in pts]
    else:
        pts = [(0.0, a), (mid, (a + b) / 2.0), (float(size - 1), b)]
    rr, cc = np.mgrid[0:size, 0:size]
    region = np.zeros((size, size), dtype=bool)
    for (r1, c1), (r2, c2) in zip(pts[:-1], pts[1:]):
        dr, dc = r2 - r1, c2 - c1
        length2 = dr * dr + dc * dc
        t = ((rr - r1) * dr + (cc - c1) * dc) / max(length2, 1e-9)
        t = np.clip(t, 0.0, 1.0)
        dist2 = (rr - (r1 + t * dr)) ** 2 + (cc - (c1 + t * dc)) ** 2
        region |= dist2 <= (width / 2.0) ** 2
    return region


def _paint_building(rng: np.random.Generator, img: np.ndarray, region: np.ndarray) -> None:
    color = _BUILDING_COLORS[int(rng.integers(0, len(_BUILDING_COLORS)))]
    fill = np.array(color, dtype=np.float64) + rng.normal(0.0, 4.0, size=(region.sum(), 3))
    img[region] = np.clip(fill, 0, 255).astype(np.uint8)
    border = region & ~ndimage.binary_erosion(region)
    img[border] = np.clip(np.array(color, dtype=np.float64) * 0.6, 0, 255).astype(np.uint8)


def _paint_road(rng: np.random.Generator, img: np.ndarray, region: np.ndarray) -> None:
    fill = np.array(_ROAD_COLOR, dtype=np.float64) + rng.normal(0.0, 3.0, size=(region.sum(), 3))
    img[region] = np.clip(fill, 0, 255).astype(np.uint8)


def _position_phrase(centroid: tuple[float, float], size: int) -> str:
    r, c = centroid
    vert = "top" if r < size / 3 else ("bottom" if r > 2 * size / 3 else "")
    horiz = "left" if c < size / 3 else ("right" if c > 2 * size / 3 else "")
    phrase = " ".join(p for p in (vert, horiz) if p)
    return phrase or "center"


def _count_phrase(n: int, noun: str) -> tuple[str, bool]:
    """-> (phrase, plural)."""
    if n == 1:
        return f"a {noun}", False
    word = _NUMBER_WORDS.get(n, "many")
    return f"{word} {noun}s", True


def _caption_set(edits: list[EditRecord], size: int) -> list[str]:
    if not edits:
        return list(_NO_CHANGE_SENTENCES)

    groups: list[tuple[int, str, int, str]] = []
    for cls in (BUILDING, ROAD):
        for action in ("insert", "remove"):
            sel = [e for e in edits if e.class_id == cls and e.action == action]
            if not sel:
                continue
            rs = [e.centroid[0] for e in sel]
            cs = [e.centroid[1] for e in sel]
            pos = _position_phrase((float(np.mean(rs)), float(np.mean(cs))), size)
            groups.append((cls, action, len(sel), pos))

    def clause(g, style: int) -> str:
        cls, action, n, pos = g
        noun = "building" if cls == BUILDING else "road"
        phrase, plural = _count_phrase(n, noun)
        verb_sets = {
            "insert": [
                ("appears", "appear"),
                ("is built", "are built"),
                ("has been added", "have been added"),
            ],
            "remove": [
                ("disappears", "disappear"),
                ("is removed", "are removed"),
                ("has been demolished", "have been demolished"),
            ],
        }
        sing, plur = verb_sets[action][style % 3]
        return f"{phrase} {plur if plural else sing} at the {pos}"

    has_road_insert = any(g[0] == ROAD and g[1] == "insert" for g in groups)
    has_building_insert = any(g[0] == BUILDING and g[1] == "insert" for g in groups)

    s1 = " and ".join(clause(g, 0) for g in groups) + " ."
    s2 = " and ".join(clause(g, 1) for g in groups) + " ."
    s3 = " and ".join(clause(g, 2) for g in reversed(groups)) + " ."
    parts = []
    for cls, action, n, pos in groups:
        noun = "building" if cls == BUILDING else "road"
        state = "new" if action == "insert" else "missing"
        if n == 1:
            parts.append(f"there is a {state} {noun} at the {pos}")
        else:
            word = _NUMBER_WORDS.get(n, "many")
            parts.append(f"there are {word} {state} {noun}s at the {pos}")
    s4 = " and ".join(parts) + " ."
    if has_building_insert and has_road_insert:
        s5 = "some houses are built along the road ."
    elif has_building_insert:
        s5 = "some houses show up in the scene ."
    else:
        s5 = " and ".join(clause(g, 0) for g in reversed(groups)) + " ."
    return [s1, s2, s3, s4, s5]


def synthesize_pair(
    rng: np.random.Generator,
    size: int,
    n_buildings: int,
    n_roads: int,
    p_remove: float = 0.25,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[EditRecord]]:
    """Render one pair. Returns (t1, t2, labels, edits)."""
    t1 = _terrain(rng, size)
    t2 = t1.copy()
    labels = np.full((size, size), BACKGROUND, dtype=np.int64)
    occupied = np.zeros((size, size), dtype=bool)
    edits: list[EditRecord] = []

    wanted = [(ROAD, None)] * n_roads + [(BUILDING, None)] * n_buildings
    for cls, _ in wanted:
        placed = None
        for _attempt in range(40):
            region = (
                _road_region(rng, size) if cls == ROAD else _building_region(rng, size)
            )
            if region is None or not region.any():
                continue
            if not (region & ndimage.binary_dilation(occupied, structure=_SEPARATION)).any():
                placed = region
                break
        if placed is None:
            continue
        action = "remove" if rng.random() < p_remove else "insert"
        target = t1 if action == "remove" else t2
        if cls == ROAD:
            _paint_road(rng, target, placed)
        else:
            _paint_building(rng, target, placed)
        occupied |= placed
        labels[placed] = cls
        rows, cols = np.nonzero(placed)
        edits.append(
            EditRecord(
                class_id=cls,
                action=action,
                area=int(placed.sum()),
                bbox=(int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())),
                centroid=(float(rows.mean()), float(cols.mean())),
            )
        )
    return t1, t2, labels, edits


def _split_plan(n_pairs: int) -> list[str]:
    n_train = max(1, int(round(n_pairs * 0.75)))
    rest = n_pairs - n_train
    n_val = (rest + 1) // 2
    n_test = rest - n_val
    return ["train"] * n_train + ["val"] * n_val + ["test"] * n_test


def synthesize_corpus(
    seed: int,
    n_pairs: int,
    size: int,
    out_dir,
    change_prob: float = 0.875,
) -> dict:
    """Write a full corpus (images, masks, captions.json, synth_log.json).

    Returns the edit log as a dict (also written to synth_log.json), which
    doubles as the counting oracle for the generated masks.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if size < MIN_SIZE:
        raise ValueError(f"size must be >= {MIN_SIZE}")
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    splits = _split_plan(n_pairs)
    caption_entries = []
    logs: list[PairLog] = []

    for i in range(n_pairs):
        split = splits[i]
        pair_id = f"synth_{i:04d}"
        filename = f"{pair_id}.png"
        if rng.random() < change_prob:
            n_buildings = int(rng.integers(1, 5))
            n_roads = int(rng.integers(0, 3))
        else:
            n_buildings = n_roads = 0
        t1, t2, labels, edits = synthesize_pair(rng, size, n_buildings, n_roads)
        sentences = _caption_set(edits, size)

        for sub in ("A", "B", "label"):
            (out / split / sub).mkdir(parents=True, exist_ok=True)
        Image.fromarray(t1).save(out / split / "A" / filename)
        Image.fromarray(t2).save(out / split / "B" / filename)
        save_mask(labels, out / split / "label" / filename)

        caption_entries.append(
            {
                "filename": filename,
                "split": split,
                "sentences": [{"raw": s} for s in sentences],
            }
        )
        logs.append(
            PairLog(
                pair_id=pair_id,
                split=split,
                n_buildings=sum(1 for e in edits if e.class_id == BUILDING),
                n_roads=sum(1 for e in edits if e.class_id == ROAD),
                edits=edits,
                sentences=sentences,
            )
        )

    with open(out / "captions.json", "w") as fh:
        json.dump({"images": caption_entries}, fh, indent=2)
    log_payload = {
        "seed": seed,
        "n_pairs": n_pairs,
        "size": size,
        "pairs": [asdict(p) for p in logs],
    }
    with open(out / "synth_log.json", "w") as fh:
        json.dump(log_payload, fh, indent=2)
    return log_payload
