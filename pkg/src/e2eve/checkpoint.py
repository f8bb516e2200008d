"""Checkpoint archives.

A checkpoint is a single torch-serialized archive holding a format version,
the model config, named parameter tensors, the training step, and rng state,
plus free-form extras (e.g. the generator records content hashes of the two
quantizer checkpoints it was trained against).
"""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any

import torch

from . import __version__
from .errors import IOFailure, ModelMismatch

FORMAT_VERSION = 1


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_checkpoint(
    path: str | Path,
    kind: str,
    config: dict,
    state_dict: dict,
    step: int,
    extra: dict | None = None,
) -> Path:
    path = Path(path)
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "tool_version": __version__,
        "config": config,
        "state_dict": {k: v.cpu() for k, v in state_dict.items()},
        "step": int(step),
        "rng_state": torch.get_rng_state(),
        "extra": extra or {},
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(payload, path)
    except OSError as e:
        raise IOFailure(f"cannot write checkpoint {path}: {e}") from e
    return path


def load_checkpoint(path: str | Path, expected_kind: str | None = None) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise IOFailure(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != FORMAT_VERSION:
        raise IOFailure(f"unsupported checkpoint format in {path}")
    if expected_kind is not None and payload.get("kind") != expected_kind:
        raise ModelMismatch(
            f"{path} holds a {payload.get('kind')!r} checkpoint, expected {expected_kind!r}"
        )
    return payload
