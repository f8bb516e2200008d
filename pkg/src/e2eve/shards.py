"""On-disk shard format for synthesized quadruplets.

One binary file per record plus an index JSON. Records are written with a
fixed layout (JSON header line, mask PNG bytes, then raw C-order float32
tensors) so that identical inputs produce byte-identical shards.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import __version__
from .editsynth import DriverCrop, EditQuadruplet
from .errors import IOFailure
from .imageops import Image, decode_mask_png, encode_mask_png
from .regions import freeform_region, block_region

_MAGIC = b"E2EVE-REC/1\n"
INDEX_VERSION = 1

_ARRAY_FIELDS = ("target", "source", "driver")


def encode_record(quad: EditQuadruplet) -> bytes:
    mask_png = encode_mask_png(quad.region.mask)
    arrays = {
        name: np.ascontiguousarray(getattr(quad, name).pixels, dtype=np.float32)
        for name in _ARRAY_FIELDS
    }
    header = {
        "source_image_id": quad.target.id,
        "crop_rect": list(quad.crop.rect),
        "alpha_used": quad.crop.alpha_used,
        "region_kind": quad.region.kind,
        "mask_png_nbytes": len(mask_png),
        "arrays": {name: {"shape": list(a.shape), "nbytes": a.nbytes} for name, a in arrays.items()},
    }
    parts = [_MAGIC, json.dumps(header, sort_keys=True).encode() + b"\n", mask_png]
    parts.extend(arrays[name].tobytes() for name in _ARRAY_FIELDS)
    return b"".join(parts)


def decode_record(data: bytes) -> EditQuadruplet:
    if not data.startswith(_MAGIC):
        raise IOFailure("not a shard record")
    body = data[len(_MAGIC) :]
    header_end = body.index(b"\n")
    header = json.loads(body[:header_end])
    offset = header_end + 1
    mask = decode_mask_png(body[offset : offset + header["mask_png_nbytes"]])
    offset += header["mask_png_nbytes"]
    arrays = {}
    for name in _ARRAY_FIELDS:
        meta = header["arrays"][name]
        arr = np.frombuffer(body[offset : offset + meta["nbytes"]], dtype=np.float32)
        arrays[name] = arr.reshape(meta["shape"]).copy()
        offset += meta["nbytes"]
    image_id = header["source_image_id"]
    if header["region_kind"] == "block":
        from .regions import tight_bbox

        region = block_region(mask.shape, tight_bbox(mask))
    else:
        region = freeform_region(mask)
    return EditQuadruplet(
        target=Image(pixels=arrays["target"], id=image_id),
        source=Image(pixels=arrays["source"], id=image_id),
        driver=Image(pixels=arrays["driver"], id=f"{image_id}/driver"),
        region=region,
        crop=DriverCrop(rect=tuple(header["crop_rect"]), alpha_used=header["alpha_used"]),
    )


def write_shards(
    quadruplets: Iterable[EditQuadruplet],
    out_dir: str | Path,
    config: dict,
    seed: int,
) -> Path:
    """Write records and the index; returns the index path."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IOFailure(f"cannot create shard directory {out_dir}: {e}") from e
    names = []
    for i, quad in enumerate(quadruplets):
        name = f"rec_{i:06d}.bin"
        (out_dir / name).write_bytes(encode_record(quad))
        names.append(name)
    index = {
        "format_version": INDEX_VERSION,
        "tool_version": __version__,
        "seed": seed,
        "config": config,
        "n_records": len(names),
        "records": names,
    }
    index_path = out_dir / "index.json"
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return index_path


@dataclass
class ShardDataset:
    root: Path
    index: dict

    def __len__(self) -> int:
        return self.index["n_records"]

    def __getitem__(self, i: int) -> EditQuadruplet:
        return decode_record((self.root / self.index["records"][i]).read_bytes())

    def __iter__(self) -> Iterator[EditQuadruplet]:
        for i in range(len(self)):
            yield self[i]


def open_shards(path: str | Path) -> ShardDataset:
    path = Path(path)
    index_path = path if path.name == "index.json" else path / "index.json"
    index = json.loads(index_path.read_text())
    if index.get("format_version") != INDEX_VERSION:
        raise IOFailure(f"unsupported shard index version in {index_path}")
    return ShardDataset(root=index_path.parent, index=index)
