"""Mask statistics: instance counts and per-object scale analysis.

An instance is an 8-connected component of one class. Components are
labeled with scipy.ndimage; exactness against a flood-fill oracle is
covered by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import ndimage

from .codec import BUILDING, CLASS_NAMES, ROAD

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass
class ObjectRecord:
    class_id: int
    area: int
    bbox_area: int


@dataclass
class DatasetStats:
    instances: dict[str, int] = field(default_factory=dict)
    images_with: dict[str, int] = field(default_factory=dict)
    objects: list[ObjectRecord] = field(default_factory=list)
    n_images: int = 0

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "instances": dict(self.instances),
            "images_with": dict(self.images_with),
            "objects": [
                {"class": CLASS_NAMES[o.class_id], "area": o.area, "bbox_area": o.bbox_area}
                for o in self.objects
            ],
        }


def count_components(labels: np.ndarray, class_id: int) -> int:
    """Number of 8-connected components of one class in a label raster."""
    binary = np.asarray(labels) == class_id
    _, n = ndimage.label(binary, structure=EIGHT_CONNECTED)
    return int(n)


def component_objects(labels: np.ndarray, class_id: int) -> list[ObjectRecord]:
    """Per-component area and axis-aligned bbox area for one class."""
    binary = np.asarray(labels) == class_id
    lab, n = ndimage.label(binary, structure=EIGHT_CONNECTED)
    out: list[ObjectRecord] = []
    for comp in range(1, n + 1):
        rows, cols = np.nonzero(lab == comp)
        area = int(len(rows))
        bbox_area = int((rows.max() - rows.min() + 1) * (cols.max() - cols.min() + 1))
        out.append(ObjectRecord(class_id=class_id, area=area, bbox_area=bbox_area))
    return out


def compute_stats(masks: Iterable[np.ndarray]) -> DatasetStats:
    """Aggregate instance counts and object records over a mask stream."""
    stats = DatasetStats(
        instances={CLASS_NAMES[c]: 0 for c in (BUILDING, ROAD)},
        images_with={CLASS_NAMES[c]: 0 for c in (BUILDING, ROAD)},
    )
    for labels in masks:
        stats.n_images += 1
        for cls in (BUILDING, ROAD):
            objs = component_objects(labels, cls)
            name = CLASS_NAMES[cls]
            stats.instances[name] += len(objs)
            if objs:
                stats.images_with[name] += 1
            stats.objects.extend(objs)
    return stats
