"""Named configuration presets and single-seed derivation.

``toy`` runs the whole pipeline in minutes on a laptop CPU; ``paper-scale``
carries the full-size constants (256x256 images, 16x compression, K=1024,
24-layer/16-head/1024-dim transformer, nucleus p=0.9, alpha 0.4-0.7,
20 candidates filtered to 10) for hardware that can afford them.

Every stage derives its own rng seed from the one master seed as the first
state word of SeedSequence([master_seed, crc32(stage_name)]).
"""
from __future__ import annotations

import copy
import zlib

import numpy as np

TOY = {
    "data": {"n": 40, "image_size": [64, 64], "val_fraction": 0.2},
    "synth": {
        "alpha_min": 0.4,
        "alpha_max": 0.7,
        "pos_aug": True,
        "size_aug": True,
        "driver_size": [16, 16],
        "per_image": 24,
        "area_range": [0.05, 0.35],
        "aspect_range": [0.75, 1.3333333333333333],
    },
    "vq": {
        "codebook_size": 256,
        "code_dim": 64,
        "downsample_factor": 8,
        "hidden_channels": 64,
        "steps": 1500,
        "lr": 1e-3,
        "batch_size": 16,
        "beta": 0.25,
    },
    "artist": {
        "n_layers": 4,
        "n_heads": 4,
        "embed_dim": 128,
        "driver_dropout": 0.05,
        "steps": 5000,
        "lr": 3e-4,
        "batch_size": 16,
        "warmup_steps": 100,
    },
    "sampler": {"policy": "top_p", "p": 0.9, "n_candidates": 20, "n_keep": 10, "temperature": 1.0},
    "eval": {
        "n_triplets": 16,
        "n_distractors": 100,
        "region_size": [32, 32],
        "crop_ratio": 0.75,
        "use_filter": True,
    },
}

PAPER_SCALE = {
    "data": {"n": 1024, "image_size": [256, 256], "val_fraction": 0.1},
    "synth": {
        "alpha_min": 0.4,
        "alpha_max": 0.7,
        "pos_aug": True,
        "size_aug": True,
        "driver_size": [64, 64],
        "per_image": 4,
        "area_range": [0.05, 0.35],
        "aspect_range": [0.75, 1.3333333333333333],
    },
    "vq": {
        "codebook_size": 1024,
        "code_dim": 256,
        "downsample_factor": 16,
        "hidden_channels": 128,
        "steps": 200000,
        "lr": 4.5e-6,
        "batch_size": 32,
        "beta": 0.25,
    },
    "artist": {
        "n_layers": 24,
        "n_heads": 16,
        "embed_dim": 1024,
        "driver_dropout": 0.05,
        "steps": 500000,
        "lr": 4.5e-6,
        "batch_size": 512,
        "warmup_steps": 5000,
    },
    "sampler": {"policy": "top_p", "p": 0.9, "n_candidates": 20, "n_keep": 10, "temperature": 1.0},
    "eval": {
        "n_triplets": 1024,
        "n_distractors": 100,
        "region_size": [128, 128],
        "crop_ratio": 0.75,
        "use_filter": True,
    },
}

PRESETS = {"toy": TOY, "paper-scale": PAPER_SCALE}


def get_preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


def merge_config(base: dict, override: dict) -> dict:
    """Recursive dict merge; override wins on conflicts."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def derive_seed(master_seed: int, stage: str) -> int:
    """Stage seed = first state word of SeedSequence([master, crc32(stage)])."""
    tag = zlib.crc32(stage.encode("utf-8"))
    return int(np.random.SeedSequence([int(master_seed), tag]).generate_state(1)[0])
