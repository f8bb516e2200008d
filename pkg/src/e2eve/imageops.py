"""Image container and exact area-average resampling.

Pixels live in float32 arrays of shape (3, H, W) with values in [0, 1].
Resampling accumulates in float64 so that degenerate cases stay exact:
upscaling by an integer factor replicates pixels bit-for-bit, and
downscaling a block of equal values returns exactly that value. Several
pipeline identities (paste reconstruction, copy-paste retrieval) rely on
this.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import ShapeError


@dataclass
class Image:
    """An RGB image: float32 (3, H, W) in [0, 1] plus a stable identifier."""

    pixels: np.ndarray
    id: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 3 or px.shape[0] != 3:
            raise ShapeError(f"expected (3, H, W) pixels, got {px.shape}")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    @property
    def size(self) -> tuple[int, int]:
        return self.pixels.shape[1], self.pixels.shape[2]


@lru_cache(maxsize=512)
def _overlap_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) matrix of box-overlap weights.

    Output cell i covers the input interval [i*n_in/n_out, (i+1)*n_in/n_out);
    weights are the fractional overlaps with each unit input cell.
    """
    w = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(np.floor(lo))
        j1 = min(int(np.ceil(hi)), n_in)
        for j in range(j0, j1):
            w[i, j] = min(hi, j + 1) - max(lo, j)
    w /= scale
    return w


def area_resize(pixels: np.ndarray, out_size: tuple[int, int]) -> np.ndarray:
    """Resize (…, H, W) to (…, out_h, out_w) by exact box averaging."""
    out_h, out_w = int(out_size[0]), int(out_size[1])
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"invalid output size {out_size}")
    h, w = pixels.shape[-2], pixels.shape[-1]
    if (h, w) == (out_h, out_w):
        return pixels.copy()
    x = np.asarray(pixels, dtype=np.float64)
    if h != out_h:
        x = np.tensordot(_overlap_matrix(h, out_h), x, axes=(1, x.ndim - 2))
        x = np.moveaxis(x, 0, -2)
    if w != out_w:
        x = np.tensordot(_overlap_matrix(w, out_w), x, axes=(1, x.ndim - 1))
        x = np.moveaxis(x, 0, -1)
    return x.astype(pixels.dtype if np.issubdtype(pixels.dtype, np.floating) else np.float32)


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """Quantize float [0,1] (3, H, W) to uint8 (H, W, 3)."""
    arr = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    return np.round(arr * 255.0).astype(np.uint8).transpose(1, 2, 0)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    """uint8 (H, W, 3) to float32 (3, H, W) in [0, 1]."""
    return (arr.astype(np.float32) / 255.0).transpose(2, 0, 1)


def load_image(path: str | Path, size: tuple[int, int] | None = None, image_id: str = "") -> Image:
    """Load an RGB image from disk, optionally area-resizing to (H, W)."""
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    pixels = from_uint8(arr)
    if size is not None and pixels.shape[1:] != tuple(size):
        pixels = area_resize(pixels, size)
    return Image(pixels=pixels, id=image_id or Path(path).stem)


def save_image(image: Image | np.ndarray, path: str | Path) -> None:
    pixels = image.pixels if isinstance(image, Image) else image
    PILImage.fromarray(to_uint8(pixels), mode="RGB").save(path)


def encode_png(pixels: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    PILImage.fromarray(to_uint8(pixels), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    import io

    with PILImage.open(io.BytesIO(data)) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def save_mask(mask: np.ndarray, path: str | Path) -> None:
    """Write a binary (H, W) mask as a single-channel PNG (255 = inside)."""
    PILImage.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255, mode="L").save(path)


def encode_mask_png(mask: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    PILImage.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_mask_png(data: bytes) -> np.ndarray:
    import io

    with PILImage.open(io.BytesIO(data)) as im:
        return (np.asarray(im.convert("L")) > 0).astype(np.uint8)
