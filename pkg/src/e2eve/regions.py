"""Edit regions: binary masks with tight bounding boxes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, ShapeError

Rect = tuple[int, int, int, int]  # top, left, height, width


@dataclass(frozen=True)
class EditRegion:
    """Binary (H, W) mask selecting where an edit may change the image.

    ``bbox`` is the tight bounding box of the set pixels. For ``kind="block"``
    the mask is exactly its bounding-box rectangle.
    """

    mask: np.ndarray
    bbox: Rect
    kind: str  # "block" | "freeform"

    def __post_init__(self):
        if self.kind not in ("block", "freeform"):
            raise ValueError(f"unknown region kind {self.kind!r}")

    @property
    def area(self) -> int:
        return int(self.mask.sum())

    @property
    def image_size(self) -> tuple[int, int]:
        return self.mask.shape


def tight_bbox(mask: np.ndarray) -> Rect:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("mask has no set pixels")
    top, bottom = int(rows[0]), int(rows[-1])
    left, right = int(cols[0]), int(cols[-1])
    return top, left, bottom - top + 1, right - left + 1


def block_region(image_size: tuple[int, int], rect: Rect) -> EditRegion:
    """Rectangular region; the mask equals the rectangle."""
    h_img, w_img = image_size
    top, left, h, w = (int(v) for v in rect)
    if h < 1 or w < 1 or top < 0 or left < 0 or top + h > h_img or left + w > w_img:
        raise ShapeError(f"rect {rect} does not fit inside {image_size}")
    mask = np.zeros((h_img, w_img), dtype=np.uint8)
    mask[top : top + h, left : left + w] = 1
    return EditRegion(mask=mask, bbox=(top, left, h, w), kind="block")


def freeform_region(mask: np.ndarray) -> EditRegion:
    """Arbitrary-shape region from a binary mask; small holes are preserved."""
    m = (np.asarray(mask) > 0).astype(np.uint8)
    if m.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {m.shape}")
    return EditRegion(mask=m, bbox=tight_bbox(m), kind="freeform")
