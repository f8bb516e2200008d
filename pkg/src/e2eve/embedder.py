"""Deterministic feature embedders for the evaluation metrics.

The default is a fixed-seed, untrained convolutional stack: weights are
drawn once from a seeded generator and never trained, so the map is a pure
function of its input with no downloaded weights. Features are global
average pools of every stage concatenated, which makes the embedder
input-size agnostic. Anything callable with the same interface (pixels in,
1-D feature vector out, plus ``dim`` and ``descriptor``) can be plugged in
instead.
"""
from __future__ import annotations

from typing import Protocol

import numpy as np
import torch
from torch import nn


class FeatureEmbedder(Protocol):
    dim: int
    descriptor: dict

    def __call__(self, pixels: np.ndarray) -> np.ndarray: ...


class ConvFeatureEmbedder:
    """Untrained conv stack; embed(x) = concatenated per-stage channel means."""

    def __init__(self, seed: int = 0, widths: tuple[int, ...] = (24, 24, 16)):
        gen = torch.Generator().manual_seed(seed)
        layers = []
        c_in = 3
        for c_out in widths:
            conv = nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * 0.4)
                conv.bias.copy_(torch.randn(conv.bias.shape, generator=gen) * 0.1)
            layers.append(conv)
            c_in = c_out
        self._layers = layers
        for layer in self._layers:
            layer.requires_grad_(False)
        self.dim = 3 + sum(widths)
        self.descriptor = {"kind": "random-conv", "seed": seed, "widths": list(widths)}

    def __call__(self, pixels: np.ndarray) -> np.ndarray:
        x = torch.from_numpy(np.ascontiguousarray(pixels, dtype=np.float32))[None]
        feats = [x.mean(dim=(2, 3))]
        with torch.no_grad():
            for layer in self._layers:
                x = torch.tanh(layer(x))
                feats.append(x.mean(dim=(2, 3)))
        return torch.cat(feats, dim=1)[0].to(torch.float64).numpy()


def embed_set(embedder: FeatureEmbedder, images: list[np.ndarray]) -> np.ndarray:
    """(N, dim) feature matrix, one image at a time for per-image determinism."""
    return np.stack([embedder(px) for px in images])
