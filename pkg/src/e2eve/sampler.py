"""Edit sampling: decoding policies, candidate generation, similarity filtering.

Candidates are decoded one token at a time from cached conditioning, each
from its own rng stream derived from (seed, candidate index), so candidate i
never depends on how many candidates were requested and filtering never
perturbs sampling.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .artist import ArtistModel, load_artist
from .checkpoint import file_sha256
from .errors import InvalidRequest, ModelMismatch, ShapeError, Unsupported
from .imageops import Image, area_resize
from .regions import EditRegion
from .vq import VqModel, load_vq


@dataclass(frozen=True)
class SamplingPolicy:
    kind: str = "top_p"  # "greedy" | "top_k" | "top_p"
    k: int = 1
    p: float = 0.9
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("greedy", "top_k", "top_p"):
            raise InvalidRequest(f"unknown sampling kind {self.kind!r}")
        if not (0.0 <= self.p <= 1.0):
            raise InvalidRequest(f"p must lie in [0, 1], got {self.p}")
        if self.k < 1:
            raise InvalidRequest(f"k must be >= 1, got {self.k}")
        if self.temperature <= 0:
            raise InvalidRequest(f"temperature must be positive, got {self.temperature}")


def nucleus_restrict(histogram: np.ndarray, p: float) -> np.ndarray:
    """Keep the smallest prefix of probability-sorted tokens with cumulative mass >= p.

    Always keeps at least one token; ties in probability are broken toward
    the lower index. The kept mass is renormalized.
    """
    h = np.asarray(histogram, dtype=np.float64)
    order = np.argsort(-h, kind="stable")
    csum = np.cumsum(h[order])
    hits = np.flatnonzero(csum >= p)
    n_keep = int(hits[0]) + 1 if hits.size else h.size
    out = np.zeros_like(h)
    kept = order[:n_keep]
    out[kept] = h[kept]
    return out / out.sum()


def topk_restrict(histogram: np.ndarray, k: int) -> np.ndarray:
    """Keep the k highest-probability tokens (ties toward the lower index)."""
    h = np.asarray(histogram, dtype=np.float64)
    if k < 1:
        raise InvalidRequest(f"k must be >= 1, got {k}")
    order = np.argsort(-h, kind="stable")
    out = np.zeros_like(h)
    kept = order[: min(k, h.size)]
    out[kept] = h[kept]
    return out / out.sum()


def restrict(histogram: np.ndarray, policy: SamplingPolicy) -> np.ndarray:
    if policy.kind == "greedy":
        return topk_restrict(histogram, 1)
    if policy.kind == "top_k":
        return topk_restrict(histogram, policy.k)
    return nucleus_restrict(histogram, policy.p)


def _sample_index(histogram: np.ndarray, rng: np.random.Generator) -> int:
    csum = np.cumsum(histogram)
    return int(np.searchsorted(csum, rng.random() * csum[-1], side="right").clip(0, histogram.size - 1))


@dataclass
class ArtistBundle:
    """A generator plus the two frozen quantizers it was trained against."""

    artist: ArtistModel
    vq_image: VqModel
    vq_driver: VqModel
    meta: dict = field(default_factory=dict)

    @property
    def null_driver_trained(self) -> bool:
        return bool(self.meta.get("null_driver_trained", False))


def load_bundle(artist_path, vq_image_path, vq_driver_path) -> ArtistBundle:
    """Load checkpoints and verify the quantizer content hashes."""
    artist_model, extra = load_artist(artist_path)
    for name, path in (("vq_image", vq_image_path), ("vq_driver", vq_driver_path)):
        expected = extra.get(f"{name}_sha256")
        actual = file_sha256(path)
        if expected is not None and expected != actual:
            raise ModelMismatch(
                f"{name} checkpoint {path} has hash {actual[:12]}…, "
                f"generator was trained against {expected[:12]}…"
            )
    return ArtistBundle(
        artist=artist_model,
        vq_image=load_vq(vq_image_path),
        vq_driver=load_vq(vq_driver_path),
        meta=extra,
    )


@dataclass
class EditRequest:
    source: Image                # region already zeroed
    region: EditRegion
    driver: Image | None         # None = unconditional inpainting
    n_candidates: int = 20
    n_keep: int = 10
    policy: SamplingPolicy = SamplingPolicy()

    def __post_init__(self):
        if self.n_keep > self.n_candidates:
            raise InvalidRequest(
                f"n_keep {self.n_keep} exceeds n_candidates {self.n_candidates}"
            )


@dataclass
class EditCandidate:
    image: Image
    tokens: np.ndarray
    nll: float
    index: int
    region: EditRegion


@dataclass
class SampleRun:
    candidates: list[EditCandidate]
    images_per_second: float
    policy: SamplingPolicy


def _decode_candidate(
    model: ArtistModel,
    cond_caches: list,
    first_logits: torch.Tensor,
    policy: SamplingPolicy,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """One full output grid plus its mean per-token NLL under the raw model."""
    lay = model.layout
    n_out = lay.n_output_tokens
    caches = [(k.clone(), v.clone()) for k, v in cond_caches]
    logits = first_logits
    tokens = np.empty(n_out, dtype=np.int64)
    nll = 0.0
    for m in range(n_out):
        raw = logits[0].to(torch.float64)
        logp = torch.log_softmax(raw, dim=-1).numpy()
        if policy.kind == "greedy":
            tok = int(np.argmax(logp))
        else:
            hist = torch.softmax(raw / policy.temperature, dim=-1).numpy()
            tok = _sample_index(restrict(hist, policy), rng)
        tokens[m] = tok
        nll -= logp[tok]
        if m + 1 < n_out:
            caches, logits = model.decode_step(
                caches, torch.tensor([tok], dtype=torch.int64), m
            )
    return tokens.reshape(lay.source_shape), nll / n_out


def sample_edit(bundle: ArtistBundle, request: EditRequest) -> SampleRun:
    """Draw n_candidates edited images for one (source, region, driver) input."""
    model = bundle.artist
    lay = model.layout
    if request.driver is None and not bundle.null_driver_trained:
        raise Unsupported("model was trained without null-driver support")
    f = bundle.vq_image.config.downsample_factor
    expect = (lay.source_shape[0] * f, lay.source_shape[1] * f)
    if request.source.size != expect:
        raise ShapeError(f"source size {request.source.size} != model input {expect}")

    t0 = time.perf_counter()
    with torch.no_grad():
        src_tokens = bundle.vq_image.encode_tokens(
            torch.from_numpy(request.source.pixels[None])
        ).flatten(1)
        drv_tokens = None
        if request.driver is not None:
            fd = bundle.vq_driver.config.downsample_factor
            expect_d = (lay.driver_shape[0] * fd, lay.driver_shape[1] * fd)
            if request.driver.size != expect_d:
                raise ShapeError(
                    f"driver size {request.driver.size} != model input {expect_d}"
                )
            drv_tokens = bundle.vq_driver.encode_tokens(
                torch.from_numpy(request.driver.pixels[None])
            ).flatten(1)
        cond_caches, first_logits = model.prefill(src_tokens, drv_tokens)

        candidates = []
        for i in range(request.n_candidates):
            rng = np.random.default_rng(np.random.SeedSequence([request.policy.seed, i]))
            grid, nll = _decode_candidate(model, cond_caches, first_logits, request.policy, rng)
            pixels = bundle.vq_image.decode_tokens(torch.from_numpy(grid[None]))[0].numpy()
            candidates.append(
                EditCandidate(
                    image=Image(pixels=pixels, id=f"{request.source.id}/sample_{i:02d}"),
                    tokens=grid,
                    nll=nll,
                    index=i,
                    region=request.region,
                )
            )
    elapsed = max(time.perf_counter() - t0, 1e-9)
    return SampleRun(
        candidates=candidates,
        images_per_second=request.n_candidates / elapsed,
        policy=request.policy,
    )


def region_crop_resized(pixels: np.ndarray, region: EditRegion, out_size: tuple[int, int]) -> np.ndarray:
    """Crop the region bounding box and resize; the faithfulness/filter query."""
    t, l, h, w = region.bbox
    return area_resize(pixels[:, t : t + h, l : l + w], out_size)


def filter_by_driver(
    candidates: list[EditCandidate],
    driver: Image,
    embedder,
    n_keep: int,
) -> list[tuple[EditCandidate, float]]:
    """Keep the n_keep candidates most similar to the driver, best first.

    Similarity is negative squared distance in the embedder's feature space
    between the candidate's edit region (resized to driver size) and the
    driver. Ties keep the lower candidate index first.
    """
    if n_keep > len(candidates):
        raise InvalidRequest(f"cannot keep {n_keep} of {len(candidates)} candidates")
    ref = embedder(driver.pixels)
    scored = []
    for cand in candidates:
        query = region_crop_resized(cand.image.pixels, cand.region, driver.size)
        delta = embedder(query) - ref
        scored.append((cand, -float(np.dot(delta, delta))))
    scored.sort(key=lambda cs: (-cs[1], cs[0].index))
    return scored[:n_keep]
