"""Corpus ingestion, deterministic splits, the procedural toy corpus, and mask files.

A manifest is a JSON file sitting in the corpus root; all paths inside it are
relative to that root. Split assignment is a pure function of the sorted image
ids and the seed, with val size = floor(n * val_fraction).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import __version__
from .errors import EmptyMask, IOFailure, MaskShapeMismatch, NoImages
from .imageops import Image, load_image, save_image, save_mask
from .regions import EditRegion, freeform_region

MANIFEST_VERSION = 1
IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


@dataclass
class ManifestEntry:
    id: str
    relative_path: str
    split: str  # "train" | "val"
    mask_path: str | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    image_size: tuple[int, int]
    seed: int
    root: Path
    metadata: dict = field(default_factory=dict)

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def load(self, entry: ManifestEntry) -> Image:
        return load_image(self.root / entry.relative_path, size=self.image_size, image_id=entry.id)

    def load_mask(self, entry: ManifestEntry) -> EditRegion:
        if entry.mask_path is None:
            raise MaskShapeMismatch(f"entry {entry.id} has no mask")
        return load_mask(self.root / entry.mask_path, expected_size=self.image_size)

    def to_json(self) -> str:
        doc = {
            "manifest_version": MANIFEST_VERSION,
            "image_size": list(self.image_size),
            "seed": self.seed,
            "metadata": self.metadata,
            "entries": [
                {k: v for k, v in vars(e).items() if v is not None} for e in self.entries
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path | None = None) -> Path:
        path = Path(path) if path is not None else self.root / "manifest.json"
        try:
            path.write_text(self.to_json())
        except OSError as e:
            raise IOFailure(f"cannot write manifest to {path}: {e}") from e
        return path


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("manifest_version") != MANIFEST_VERSION:
        raise IOFailure(f"unsupported manifest version in {path}")
    entries = [
        ManifestEntry(
            id=e["id"],
            relative_path=e["relative_path"],
            split=e["split"],
            mask_path=e.get("mask_path"),
        )
        for e in doc["entries"]
    ]
    return DatasetManifest(
        entries=entries,
        image_size=tuple(doc["image_size"]),
        seed=int(doc["seed"]),
        root=path.parent,
        metadata=doc.get("metadata", {}),
    )


def assign_splits(ids: list[str], val_fraction: float, seed: int) -> dict[str, str]:
    """val size = floor(n * val_fraction); assignment depends only on (sorted ids, seed)."""
    ordered = sorted(ids)
    n_val = int(np.floor(len(ordered) * val_fraction))
    perm = np.random.default_rng(seed).permutation(len(ordered))
    val_ids = {ordered[i] for i in perm[:n_val]}
    return {i: ("val" if i in val_ids else "train") for i in ordered}


def ingest_folder(
    path: str | Path,
    image_size: tuple[int, int],
    val_fraction: float = 0.1,
    seed: int = 0,
) -> DatasetManifest:
    """Scan a directory of images into a manifest with a deterministic split.

    Undecodable files are skipped (counted in manifest metadata); images are
    recorded at their source paths and resized to ``image_size`` on load.
    """
    root = Path(path)
    candidates = sorted(
        p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )
    good: list[Path] = []
    skipped = 0
    for p in candidates:
        try:
            with PILImage.open(p) as im:
                im.verify()
            good.append(p)
        except Exception:
            skipped += 1
            warnings.warn(f"skipping undecodable image {p}")
    if not good:
        raise NoImages(f"no decodable images under {root}")
    ids = [p.relative_to(root).as_posix() for p in good]
    splits = assign_splits(ids, val_fraction, seed)
    entries = [
        ManifestEntry(id=i, relative_path=i, split=splits[i]) for i in sorted(ids)
    ]
    return DatasetManifest(
        entries=entries,
        image_size=(int(image_size[0]), int(image_size[1])),
        seed=seed,
        root=root,
        metadata={"skipped": skipped, "tool_version": __version__},
    )


# --- procedural toy corpus ---------------------------------------------------

_BACKGROUNDS = [
    (0.92, 0.91, 0.86),
    (0.18, 0.20, 0.24),
    (0.75, 0.83, 0.90),
    (0.85, 0.78, 0.70),
    (0.55, 0.60, 0.55),
    (0.30, 0.26, 0.33),
]

_SHAPE_COLORS = [
    (0.85, 0.20, 0.18),
    (0.16, 0.55, 0.22),
    (0.15, 0.30, 0.75),
    (0.92, 0.75, 0.10),
    (0.10, 0.70, 0.72),
    (0.75, 0.20, 0.70),
    (0.95, 0.50, 0.10),
    (0.45, 0.28, 0.65),
]


def _draw_shape(canvas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Paint one textured shape onto (3, H, W); returns its footprint mask."""
    h, w = canvas.shape[1:]
    side = int(rng.integers(min(h, w) // 4, int(min(h, w) * 0.55) + 1))
    top = int(rng.integers(0, h - side + 1))
    left = int(rng.integers(0, w - side + 1))
    kind = rng.choice(["rectangle", "ellipse"])
    yy, xx = np.mgrid[0:h, 0:w]
    if kind == "rectangle":
        inside = (yy >= top) & (yy < top + side) & (xx >= left) & (xx < left + side)
    else:
        cy, cx = top + side / 2.0, left + side / 2.0
        inside = ((yy + 0.5 - cy) / (side / 2.0)) ** 2 + ((xx + 0.5 - cx) / (side / 2.0)) ** 2 <= 1.0

    color = np.array(_SHAPE_COLORS[rng.integers(0, len(_SHAPE_COLORS))], dtype=np.float64)
    second = np.array(_SHAPE_COLORS[rng.integers(0, len(_SHAPE_COLORS))], dtype=np.float64)
    texture = rng.choice(["solid", "stripes_h", "stripes_v", "checker"])
    period = int(rng.choice([4, 8]))
    if texture == "solid":
        pattern = np.ones((h, w), dtype=bool)
    elif texture == "stripes_h":
        pattern = (yy // period) % 2 == 0
    elif texture == "stripes_v":
        pattern = (xx // period) % 2 == 0
    else:
        pattern = ((yy // period) + (xx // period)) % 2 == 0

    fill = np.where(pattern[None], color[:, None, None], second[:, None, None])
    canvas[:, inside] = fill[:, inside]
    return inside.astype(np.uint8)


def make_toy_image(image_size: tuple[int, int], rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One toy image plus the footprint mask of its last-drawn (fully visible) shape."""
    h, w = image_size
    bg = np.array(_BACKGROUNDS[rng.integers(0, len(_BACKGROUNDS))], dtype=np.float64)
    canvas = np.broadcast_to(bg[:, None, None], (3, h, w)).copy()
    n_shapes = int(rng.integers(1, 4))
    mask = None
    for _ in range(n_shapes):
        mask = _draw_shape(canvas, rng)
    return canvas.astype(np.float32), mask


def make_toy_corpus(
    n: int,
    image_size: tuple[int, int],
    seed: int,
    out: str | Path,
    val_fraction: float = 0.2,
) -> DatasetManifest:
    """Write n procedural images (solid background + 1-3 textured shapes) plus
    one free-form mask per image, and a manifest with a deterministic split."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "masks").mkdir(exist_ok=True)
    except OSError as e:
        raise IOFailure(f"cannot create corpus directory {out}: {e}") from e

    ids = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        pixels, mask = make_toy_image(image_size, rng)
        image_id = f"toy_{i:05d}"
        try:
            save_image(Image(pixels=pixels, id=image_id), out / f"{image_id}.png")
            save_mask(mask, out / "masks" / f"{image_id}.png")
        except OSError as e:
            raise IOFailure(f"cannot write image {image_id}: {e}") from e
        ids.append(image_id)

    splits = assign_splits(ids, val_fraction, seed)
    entries = [
        ManifestEntry(
            id=i,
            relative_path=f"{i}.png",
            split=splits[i],
            mask_path=f"masks/{i}.png",
        )
        for i in sorted(ids)
    ]
    manifest = DatasetManifest(
        entries=entries,
        image_size=(int(image_size[0]), int(image_size[1])),
        seed=seed,
        root=out,
        metadata={"skipped": 0, "toy": True, "tool_version": __version__},
    )
    manifest.save()
    return manifest


def load_mask(path: str | Path, expected_size: tuple[int, int] | None = None) -> EditRegion:
    """Read a single-channel mask PNG; nonzero pixels are inside the region."""
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("L"))
    if expected_size is not None and arr.shape != tuple(expected_size):
        raise MaskShapeMismatch(
            f"mask {path} has shape {arr.shape}, expected {tuple(expected_size)}"
        )
    if not (arr > 0).any():
        raise EmptyMask(f"mask {path} is empty")
    return freeform_region(arr)
