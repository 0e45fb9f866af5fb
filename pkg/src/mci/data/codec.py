"""Color codec for change masks.

Masks are stored on disk as RGB PNGs. Class ids map to fixed colors:
background=(0,0,0), building=(255,0,0), road=(255,255,0). Decoding
requires an exact color match; anything else is rejected.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

BACKGROUND = 0
BUILDING = 1
ROAD = 2

CLASS_NAMES = ("background", "building", "road")
NUM_CLASSES = 3

CLASS_COLORS = {
    BACKGROUND: (0, 0, 0),
    BUILDING: (255, 0, 0),
    ROAD: (255, 255, 0),
}

_COLOR_TO_CLASS = {color: cls for cls, color in CLASS_COLORS.items()}


class MaskDecodeError(ValueError):
    """Raised when a mask raster contains a color outside the codec."""

    def __init__(self, color, row, col):
        self.color = tuple(int(c) for c in color)
        self.row = int(row)
        self.col = int(col)
        super().__init__(
            f"unknown mask color {self.color} at pixel (row={self.row}, col={self.col})"
        )


def class_id(name: str) -> int:
    """Map a class name to its integer id."""
    try:
        return CLASS_NAMES.index(name)
    except ValueError:
        raise ValueError(f"unknown class name {name!r}; expected one of {CLASS_NAMES}") from None


def encode_mask(labels: np.ndarray) -> np.ndarray:
    """Render an (H, W) label raster into an (H, W, 3) uint8 RGB image."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"label raster must be 2-D, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= NUM_CLASSES:
        raise ValueError("label raster contains ids outside {0,1,2}")
    lut = np.zeros((NUM_CLASSES, 3), dtype=np.uint8)
    for cls, color in CLASS_COLORS.items():
        lut[cls] = color
    return lut[labels]


def decode_mask(rgb: np.ndarray) -> np.ndarray:
    """Decode an (H, W, 3) uint8 RGB raster into an (H, W) label raster.

    Raises MaskDecodeError at the first pixel (row-major order) whose color
    is not part of the codec.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"mask raster must be (H, W, 3), got shape {rgb.shape}")
    labels = np.full(rgb.shape[:2], -1, dtype=np.int64)
    for cls, color in CLASS_COLORS.items():
        labels[np.all(rgb == np.array(color, dtype=rgb.dtype), axis=-1)] = cls
    bad = np.argwhere(labels < 0)
    if len(bad):
        r, c = bad[0]
        raise MaskDecodeError(rgb[r, c], r, c)
    return labels


def save_mask(labels: np.ndarray, path) -> None:
    Image.fromarray(encode_mask(labels)).save(path)


def load_mask(path) -> np.ndarray:
    rgb = np.asarray(Image.open(path).convert("RGB"))
    return decode_mask(rgb)
