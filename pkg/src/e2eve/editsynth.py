"""Self-supervised edit synthesis.

An unedited image is decomposed into a training quadruplet: the target (the
original), a source with the edit region zeroed out, and a driver produced by
cropping a square sub-window of the region and resizing it. Decorrelation
between source and driver comes from the sub-crop: its width is alpha times
the region width, and its position/size can be jittered (pos-aug / size-aug).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .dataio import DatasetManifest
from .errors import EmptyMask, InfeasibleCrop, InfeasibleRegion, ShapeError
from .imageops import Image, area_resize
from .regions import EditRegion, Rect, block_region, freeform_region


@dataclass(frozen=True)
class TransformConfig:
    """Sub-crop transformation parameters.

    alpha is the ratio of sub-crop width to edit-region width. With
    size_aug the ratio is drawn uniformly from [alpha_min, alpha_max];
    without it, alpha_min must equal alpha_max. pos_aug jitters the
    sub-crop position inside the region (otherwise centered).
    """

    alpha_min: float
    alpha_max: float
    pos_aug: bool = True
    size_aug: bool = True
    driver_size: tuple[int, int] = (16, 16)

    def __post_init__(self):
        if not (0.0 < self.alpha_min <= self.alpha_max <= 1.0):
            raise ValueError(f"need 0 < alpha_min <= alpha_max <= 1, got {self.alpha_min}, {self.alpha_max}")
        if not self.size_aug and self.alpha_min != self.alpha_max:
            raise ValueError("size_aug=False requires alpha_min == alpha_max")


@dataclass(frozen=True)
class DriverCrop:
    """The square sub-window the driver was cut from, in image coordinates."""

    rect: Rect
    alpha_used: float


@dataclass
class EditQuadruplet:
    """One training example: target, masked source, driver, and geometry."""

    target: Image
    source: Image
    driver: Image
    region: EditRegion
    crop: DriverCrop


@dataclass(frozen=True)
class BlockRegionConfig:
    area_range: tuple[float, float] = (0.05, 0.35)
    aspect_range: tuple[float, float] = (0.75, 4.0 / 3.0)


def sample_block_region(
    image_size: tuple[int, int],
    area_range: tuple[float, float] = (0.05, 0.35),
    aspect_range: tuple[float, float] = (0.75, 4.0 / 3.0),
    rng: np.random.Generator | None = None,
) -> EditRegion:
    """Uniformly place a rectangle with area fraction and aspect in the given ranges.

    Aspect is width/height. The area fraction is truncated to values for which
    some allowed aspect fits inside the image, so sampling never rejects.
    """
    rng = rng if rng is not None else np.random.default_rng()
    h_img, w_img = int(image_size[0]), int(image_size[1])
    a_lo, a_hi = area_range
    r_lo, r_hi = aspect_range
    if not (0.0 < a_lo <= a_hi <= 1.0):
        raise ValueError(f"area_range must lie in (0, 1], got {area_range}")
    if not (0.0 < r_lo <= r_hi):
        raise ValueError(f"bad aspect_range {aspect_range}")

    # Feasibility: w = sqrt(A*r) <= W and h = sqrt(A/r) <= H bound the area from above.
    a_cap = min(r_hi * h_img / w_img, w_img / (r_lo * h_img), 1.0)
    if a_lo > a_cap:
        raise InfeasibleRegion(
            f"no rectangle with area >= {a_lo:.4f} of the image fits at aspects {aspect_range}"
        )
    a = rng.uniform(a_lo, min(a_hi, a_cap))
    area_px = a * h_img * w_img
    lo = max(r_lo, area_px / h_img**2)
    hi = min(r_hi, w_img**2 / area_px)
    r = rng.uniform(lo, hi)
    h = int(np.clip(round(math.sqrt(area_px / r)), 1, h_img))
    w = int(np.clip(round(math.sqrt(area_px * r)), 1, w_img))
    top = int(rng.integers(0, h_img - h + 1))
    left = int(rng.integers(0, w_img - w + 1))
    return block_region((h_img, w_img), (top, left, h, w))


def _feasible_positions(mask: np.ndarray, bbox: Rect, side: int) -> np.ndarray:
    """(N, 2) top-left corners inside bbox where a side x side square is fully masked."""
    top, left, bh, bw = bbox
    if side > bh or side > bw:
        return np.empty((0, 2), dtype=np.int64)
    sub = mask[top : top + bh, left : left + bw].astype(np.int64)
    ii = np.zeros((bh + 1, bw + 1), dtype=np.int64)
    ii[1:, 1:] = sub.cumsum(0).cumsum(1)
    sums = (
        ii[side:, side:]
        - ii[:-side, side:]
        - ii[side:, :-side]
        + ii[:-side, :-side]
    )
    ys, xs = np.nonzero(sums == side * side)
    return np.stack([ys + top, xs + left], axis=1) if ys.size else np.empty((0, 2), dtype=np.int64)


def _crop_side(alpha: float, bbox: Rect) -> int:
    _, _, bh, bw = bbox
    return max(1, min(int(round(alpha * bw)), bh, bw))


def sample_subcrop(region: EditRegion, cfg: TransformConfig, rng: np.random.Generator) -> DriverCrop:
    """Choose the square sub-crop R_T of the edit region.

    Crop side = round(alpha * bbox_width), clamped to the bbox height. For
    free-form regions the square must lie entirely inside the mask; alpha
    shrinks toward alpha_min before the placement is declared infeasible.
    """
    top, left, bh, bw = region.bbox
    alpha = float(rng.uniform(cfg.alpha_min, cfg.alpha_max)) if cfg.size_aug else cfg.alpha_min

    if region.kind == "block":
        side = _crop_side(alpha, region.bbox)
        if cfg.pos_aug:
            t = top + int(rng.integers(0, bh - side + 1))
            l = left + int(rng.integers(0, bw - side + 1))
        else:
            t = top + (bh - side) // 2
            l = left + (bw - side) // 2
        return DriverCrop(rect=(t, l, side, side), alpha_used=alpha)

    # Free-form: walk candidate sides downward until a fully-masked square fits.
    side0 = _crop_side(alpha, region.bbox)
    side_min = _crop_side(cfg.alpha_min, region.bbox)
    for side in range(side0, side_min - 1, -1):
        positions = _feasible_positions(region.mask, region.bbox, side)
        if positions.shape[0] == 0:
            continue
        alpha_used = alpha if side == side0 else float(np.clip(side / bw, cfg.alpha_min, alpha))
        if cfg.pos_aug:
            t, l = positions[int(rng.integers(0, positions.shape[0]))]
        else:
            ct = top + (bh - side) // 2
            cl = left + (bw - side) // 2
            d2 = (positions[:, 0] - ct) ** 2 + (positions[:, 1] - cl) ** 2
            t, l = positions[int(np.argmin(d2))]
        return DriverCrop(rect=(int(t), int(l), side, side), alpha_used=alpha_used)
    raise InfeasibleCrop(
        f"no {side_min}x{side_min} square fits inside the mask (bbox {region.bbox})"
    )


def make_freeform_region(mask: EditRegion | np.ndarray) -> EditRegion:
    """Promote a loaded mask to a free-form edit region (bbox recomputed)."""
    arr = mask.mask if isinstance(mask, EditRegion) else np.asarray(mask)
    if not (arr > 0).any():
        raise EmptyMask("free-form region mask is empty")
    return freeform_region(arr)


def make_quadruplet(
    target: Image,
    region: EditRegion,
    cfg: TransformConfig,
    rng: np.random.Generator,
) -> EditQuadruplet:
    """Decompose a target image into (target, masked source, driver, region, crop).

    source = (1 - R) * target exactly; driver = area-resized sub-crop of the
    region content.
    """
    if region.mask.shape != target.size:
        raise ShapeError(
            f"region {region.mask.shape} does not match image {target.size}"
        )
    crop = sample_subcrop(region, cfg, rng)
    source_px = target.pixels * (1 - region.mask[None]).astype(np.float32)
    t, l, h, w = crop.rect
    patch = target.pixels[:, t : t + h, l : l + w]
    driver_px = area_resize(patch, cfg.driver_size)
    return EditQuadruplet(
        target=target,
        source=Image(pixels=source_px, id=target.id),
        driver=Image(pixels=driver_px, id=f"{target.id}/driver"),
        region=region,
        crop=crop,
    )


def paste(source: np.ndarray, patch: np.ndarray, rect: Rect) -> np.ndarray:
    """Write patch (resized to rect if needed) into a copy of source."""
    t, l, h, w = rect
    out = source.copy()
    if patch.shape[1:] != (h, w):
        patch = area_resize(patch, (h, w))
    out[:, t : t + h, l : l + w] = patch
    return out


def quadruplet_rng(seed: int, image_index: int, quad_index: int) -> np.random.Generator:
    """Independent per-quadruplet stream; shard workers may derive these freely."""
    return np.random.default_rng(np.random.SeedSequence([seed, image_index, quad_index]))


def synthesize_dataset(
    manifest: DatasetManifest,
    cfg: TransformConfig,
    quadruplets_per_image: int,
    seed: int,
    split: str = "train",
    freeform: bool = False,
    region_cfg: BlockRegionConfig = BlockRegionConfig(),
    max_failure_fraction: float = 0.10,
) -> Iterator[EditQuadruplet]:
    """Stream quadruplets_per_image examples for every image in the split.

    Regions are sampled per quadruplet (block) or taken from the manifest
    mask (free-form). Aborts if more than max_failure_fraction of images fail.
    """
    entries = manifest.split_entries(split)
    if not entries:
        raise ValueError(f"manifest has no {split!r} entries")
    failures: list[str] = []
    for image_index, entry in enumerate(entries):
        try:
            target = manifest.load(entry)
            base_region = manifest.load_mask(entry) if freeform else None
            for q in range(quadruplets_per_image):
                rng = quadruplet_rng(seed, image_index, q)
                region = (
                    make_freeform_region(base_region)
                    if base_region is not None
                    else sample_block_region(
                        manifest.image_size, region_cfg.area_range, region_cfg.aspect_range, rng
                    )
                )
                yield make_quadruplet(target, region, cfg, rng)
        except Exception as e:
            failures.append(f"{entry.id}: {e}")
            if len(failures) > max_failure_fraction * len(entries):
                raise RuntimeError(
                    f"too many images failed during synthesis ({len(failures)}/{len(entries)}): "
                    + "; ".join(failures[:5])
                ) from e
