"""Conditional autoregressive generator over quantized image tokens.

The flattened sequence is [source tokens ‖ driver tokens ‖ output tokens]
under causal attention, so every output position sees all conditioning.
The edit region needs no explicit encoding: the masked source carries a
region-shaped hole. Each segment has its own token embedding table and
learned 2-D (row + col) positional encodings. The distribution over output
token m is read at the position immediately before it, so the first output
token is predicted at the last driver position and no separator token is
needed.

A learned null-driver embedding replaces the driver segment for a small
fraction of training examples, which later lets the same checkpoint serve
as an unconditional inpainter.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .checkpoint import file_sha256, load_checkpoint, save_checkpoint
from .errors import DivergenceError, InvalidToken, SequenceTooLong, ShapeError


@dataclass(frozen=True)
class SequenceLayout:
    """Token-grid shapes and vocabularies for the three segments."""

    source_shape: tuple[int, int] = (8, 8)
    driver_shape: tuple[int, int] = (2, 2)
    vocab_image: int = 256
    vocab_driver: int = 256

    @property
    def n_source_tokens(self) -> int:
        return self.source_shape[0] * self.source_shape[1]

    @property
    def n_driver_tokens(self) -> int:
        return self.driver_shape[0] * self.driver_shape[1]

    @property
    def n_output_tokens(self) -> int:
        return self.n_source_tokens

    @property
    def total_len(self) -> int:
        return self.n_source_tokens + self.n_driver_tokens + self.n_output_tokens


@dataclass
class TokenSequence:
    """A validated [source ‖ driver ‖ output-prefix] sequence.

    ``positions`` maps each flat index to (segment, row, col).
    """

    source: np.ndarray
    driver: np.ndarray
    prefix: np.ndarray
    layout: SequenceLayout
    positions: list[tuple[str, int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return self.source.size + self.driver.size + self.prefix.size


def build_sequence(
    source_tokens: np.ndarray,
    driver_tokens: np.ndarray,
    output_prefix: np.ndarray | None = None,
    layout: SequenceLayout | None = None,
) -> TokenSequence:
    """Assemble and validate the canonical token sequence."""
    source = np.asarray(source_tokens, dtype=np.int64).reshape(-1)
    driver = np.asarray(driver_tokens, dtype=np.int64).reshape(-1)
    prefix = (
        np.asarray(output_prefix, dtype=np.int64).reshape(-1)
        if output_prefix is not None
        else np.empty(0, dtype=np.int64)
    )
    if layout is None:
        side_s = int(round(math.sqrt(source.size)))
        side_d = int(round(math.sqrt(driver.size)))
        layout = SequenceLayout(source_shape=(side_s, side_s), driver_shape=(side_d, side_d))
    if source.size != layout.n_source_tokens or driver.size != layout.n_driver_tokens:
        raise ShapeError(
            f"got {source.size} source / {driver.size} driver tokens, layout expects "
            f"{layout.n_source_tokens} / {layout.n_driver_tokens}"
        )
    if prefix.size > layout.n_output_tokens:
        raise SequenceTooLong(
            f"output prefix of {prefix.size} exceeds {layout.n_output_tokens} output tokens"
        )
    for name, arr, vocab in (
        ("source", source, layout.vocab_image),
        ("driver", driver, layout.vocab_driver),
        ("output", prefix, layout.vocab_image),
    ):
        if arr.size and (arr.min() < 0 or arr.max() >= vocab):
            raise InvalidToken(f"{name} tokens outside [0, {vocab})")

    positions = []
    for seg, arr, (h, w) in (
        ("source", source, layout.source_shape),
        ("driver", driver, layout.driver_shape),
        ("output", prefix, layout.source_shape),
    ):
        for i in range(arr.size):
            positions.append((seg, i // w, i % w))
    return TokenSequence(source=source, driver=driver, prefix=prefix, layout=layout, positions=positions)


@dataclass(frozen=True)
class ArtistConfig:
    layout: SequenceLayout = SequenceLayout()
    n_layers: int = 4
    n_heads: int = 4
    embed_dim: int = 128
    driver_dropout: float = 0.05

    def __post_init__(self):
        if self.embed_dim % self.n_heads:
            raise ValueError("embed_dim must be divisible by n_heads")


class _Block(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.ln1 = nn.LayerNorm(dim)
        self.ln2 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.fc1 = nn.Linear(dim, 4 * dim)
        self.fc2 = nn.Linear(4 * dim, dim)

    def forward(self, x, cache=None):
        b, t, d = x.shape
        hd = d // self.heads
        q, k, v = self.qkv(self.ln1(x)).split(d, dim=2)
        q = q.view(b, t, self.heads, hd).transpose(1, 2)
        k = k.view(b, t, self.heads, hd).transpose(1, 2)
        v = v.view(b, t, self.heads, hd).transpose(1, 2)
        if cache is not None:
            k = torch.cat([cache[0], k], dim=2)
            v = torch.cat([cache[1], v], dim=2)
        new_cache = (k, v)
        t_past = k.shape[2] - t
        if t_past == 0:
            y = F.scaled_dot_product_attention(q, k, v, is_causal=True)
        elif t == 1:
            y = F.scaled_dot_product_attention(q, k, v)
        else:
            mask = torch.ones(t, t_past + t, dtype=torch.bool, device=x.device).tril(t_past)
            y = F.scaled_dot_product_attention(q, k, v, attn_mask=mask)
        y = y.transpose(1, 2).reshape(b, t, d)
        x = x + self.proj(y)
        x = x + self.fc2(F.gelu(self.fc1(self.ln2(x))))
        return x, new_cache


class ArtistModel(nn.Module):
    def __init__(self, config: ArtistConfig):
        super().__init__()
        self.config = config
        lay = config.layout
        d = config.embed_dim
        self.source_tok = nn.Embedding(lay.vocab_image, d)
        self.driver_tok = nn.Embedding(lay.vocab_driver, d)
        self.output_tok = nn.Embedding(lay.vocab_image, d)
        self.source_pos_row = nn.Embedding(lay.source_shape[0], d)
        self.source_pos_col = nn.Embedding(lay.source_shape[1], d)
        self.driver_pos_row = nn.Embedding(lay.driver_shape[0], d)
        self.driver_pos_col = nn.Embedding(lay.driver_shape[1], d)
        self.output_pos_row = nn.Embedding(lay.source_shape[0], d)
        self.output_pos_col = nn.Embedding(lay.source_shape[1], d)
        self.null_driver = nn.Parameter(torch.randn(d) * 0.02)
        self.blocks = nn.ModuleList(_Block(d, config.n_heads) for _ in range(config.n_layers))
        self.ln_f = nn.LayerNorm(d)
        self.head = nn.Linear(d, lay.vocab_image)
        # Zero-init head: uniform histograms at initialization.
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    @property
    def layout(self) -> SequenceLayout:
        return self.config.layout

    def _grid_pos(self, shape, row_emb, col_emb):
        h, w = shape
        rows = torch.arange(h, device=row_emb.weight.device).repeat_interleave(w)
        cols = torch.arange(w, device=col_emb.weight.device).repeat(h)
        return row_emb(rows) + col_emb(cols)

    def embed_conditioning(
        self,
        source_tokens: torch.Tensor,
        driver_tokens: torch.Tensor | None,
        driver_drop: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """(B, n_src + n_drv, d) embeddings for the conditioning segments."""
        lay = self.layout
        b = source_tokens.shape[0]
        src = self.source_tok(source_tokens) + self._grid_pos(
            lay.source_shape, self.source_pos_row, self.source_pos_col
        )
        n_drv = lay.n_driver_tokens
        drv_pos = self._grid_pos(lay.driver_shape, self.driver_pos_row, self.driver_pos_col)
        if driver_tokens is None:
            drv = self.null_driver.expand(b, n_drv, -1) + drv_pos
        else:
            drv = self.driver_tok(driver_tokens) + drv_pos
            if driver_drop is not None and driver_drop.any():
                null = self.null_driver.expand(n_drv, -1) + drv_pos
                drv = torch.where(driver_drop[:, None, None], null, drv)
        return torch.cat([src, drv], dim=1)

    def embed_output(self, output_tokens: torch.Tensor, start: int = 0) -> torch.Tensor:
        lay = self.layout
        p = output_tokens.shape[1]
        pos = self._grid_pos(lay.source_shape, self.output_pos_row, self.output_pos_col)
        return self.output_tok(output_tokens) + pos[start : start + p]

    def _trunk(self, x: torch.Tensor) -> torch.Tensor:
        for block in self.blocks:
            x, _ = block(x)
        return self.head(self.ln_f(x))

    def output_logits(
        self,
        source_tokens: torch.Tensor,
        driver_tokens: torch.Tensor | None,
        output_tokens: torch.Tensor | None = None,
        driver_drop: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Logits predicting output tokens.

        With a prefix of p < n_output tokens the result has p + 1 positions
        (the next-token distribution included); with the full grid it has
        exactly n_output positions (teacher forcing).
        """
        lay = self.layout
        cond = self.embed_conditioning(source_tokens, driver_tokens, driver_drop)
        if output_tokens is not None and output_tokens.shape[1] > 0:
            if output_tokens.shape[1] > lay.n_output_tokens:
                raise SequenceTooLong(
                    f"{output_tokens.shape[1]} output tokens exceed layout maximum "
                    f"{lay.n_output_tokens}"
                )
            x = torch.cat([cond, self.embed_output(output_tokens)], dim=1)
            p = output_tokens.shape[1]
        else:
            x = cond
            p = 0
        logits = self._trunk(x)
        start = lay.n_source_tokens + lay.n_driver_tokens - 1
        n_pred = min(p + 1, lay.n_output_tokens)
        return logits[:, start : start + n_pred]

    # --- incremental decoding -------------------------------------------------

    @torch.no_grad()
    def prefill(
        self, source_tokens: torch.Tensor, driver_tokens: torch.Tensor | None
    ) -> tuple[list, torch.Tensor]:
        """Run the conditioning segments; returns (kv caches, logits for output 0)."""
        x = self.embed_conditioning(source_tokens, driver_tokens)
        caches = []
        for block in self.blocks:
            x, cache = block(x, cache=None)
            caches.append(cache)
        logits = self.head(self.ln_f(x[:, -1]))
        return caches, logits

    @torch.no_grad()
    def decode_step(
        self, caches: list, token: torch.Tensor, position: int
    ) -> tuple[list, torch.Tensor]:
        """Feed output token at the given output position; returns logits for the next."""
        x = self.embed_output(token.view(-1, 1), start=position)
        new_caches = []
        for block, cache in zip(self.blocks, caches):
            x, new_cache = block(x, cache=cache)
            new_caches.append(new_cache)
        return new_caches, self.head(self.ln_f(x[:, -1]))


def build_artist_model(config: ArtistConfig, seed: int = 0) -> ArtistModel:
    torch.manual_seed(seed)
    return ArtistModel(config)


def forward(model: ArtistModel, sequence: TokenSequence) -> np.ndarray:
    """Per-position histograms over the image vocabulary (rows sum to 1)."""
    with torch.no_grad():
        logits = model.output_logits(
            torch.from_numpy(sequence.source[None]),
            torch.from_numpy(sequence.driver[None]),
            torch.from_numpy(sequence.prefix[None]) if sequence.prefix.size else None,
        )
        return torch.softmax(logits[0].to(torch.float64), dim=-1).numpy()


# --- training -----------------------------------------------------------------

@dataclass
class TrainBatch:
    """Tokenized quadruplets, grids flattened row-major."""

    source_tokens: torch.Tensor
    driver_tokens: torch.Tensor
    target_tokens: torch.Tensor
    driver_drop: torch.Tensor | None = None


def batch_nll(model: ArtistModel, batch: TrainBatch) -> torch.Tensor:
    """Teacher-forced mean NLL per output token."""
    logits = model.output_logits(
        batch.source_tokens, batch.driver_tokens, batch.target_tokens, batch.driver_drop
    )
    k = model.layout.vocab_image
    return F.cross_entropy(logits.reshape(-1, k), batch.target_tokens.reshape(-1))


def train_step(model: ArtistModel, batch: TrainBatch, optimizer: torch.optim.Optimizer) -> float:
    nll = batch_nll(model, batch)
    if not torch.isfinite(nll):
        raise DivergenceError("non-finite NLL in train step")
    optimizer.zero_grad()
    nll.backward()
    optimizer.step()
    return float(nll.detach())


@torch.no_grad()
def eval_nll(model: ArtistModel, batch: TrainBatch, chunk: int = 64) -> float:
    """Mean per-token NLL over a dataset; no updates, driver never dropped."""
    was_training = model.training
    model.eval()
    total, count = 0.0, 0
    n = batch.source_tokens.shape[0]
    for i in range(0, n, chunk):
        sl = slice(i, min(i + chunk, n))
        logits = model.output_logits(
            batch.source_tokens[sl], batch.driver_tokens[sl], batch.target_tokens[sl]
        )
        k = model.layout.vocab_image
        nll = F.cross_entropy(
            logits.reshape(-1, k), batch.target_tokens[sl].reshape(-1), reduction="sum"
        )
        total += float(nll)
        count += int(batch.target_tokens[sl].numel())
    if was_training:
        model.train()
    return total / count


@torch.no_grad()
def stepwise_nll(model: ArtistModel, batch: TrainBatch) -> float:
    """Autoregressive per-token NLL computed one factor at a time (oracle path)."""
    lay = model.layout
    total, count = 0.0, 0
    for i in range(batch.source_tokens.shape[0]):
        src = batch.source_tokens[i : i + 1]
        drv = batch.driver_tokens[i : i + 1]
        tgt = batch.target_tokens[i]
        for m in range(lay.n_output_tokens):
            logits = model.output_logits(src, drv, tgt[None, :m] if m else None)
            logp = F.log_softmax(logits[0, -1], dim=-1)
            total += -float(logp[tgt[m]])
            count += 1
    return total / count


@dataclass
class ArtistTrainConfig:
    lr: float = 3e-4
    batch_size: int = 16
    steps: int = 4000
    seed: int = 0
    warmup_steps: int = 100
    grad_clip: float = 1.0
    weight_decay: float = 0.01


@dataclass
class TokenDataset:
    source: torch.Tensor  # (N, n_src)
    driver: torch.Tensor  # (N, n_drv)
    target: torch.Tensor  # (N, n_out)

    def __len__(self) -> int:
        return self.source.shape[0]


def tokenize_quadruplets(quads, vq_image, vq_driver, chunk: int = 32) -> TokenDataset:
    """Encode (source, driver, target) of each quadruplet with the frozen quantizers."""
    quads = list(quads)
    sources, drivers, targets = [], [], []
    with torch.no_grad():
        for i in range(0, len(quads), chunk):
            part = quads[i : i + chunk]
            src = torch.from_numpy(np.stack([q.source.pixels for q in part]))
            drv = torch.from_numpy(np.stack([q.driver.pixels for q in part]))
            tgt = torch.from_numpy(np.stack([q.target.pixels for q in part]))
            sources.append(vq_image.encode_tokens(src).flatten(1))
            drivers.append(vq_driver.encode_tokens(drv).flatten(1))
            targets.append(vq_image.encode_tokens(tgt).flatten(1))
    return TokenDataset(
        source=torch.cat(sources), driver=torch.cat(drivers), target=torch.cat(targets)
    )


def train_artist(
    model: ArtistModel,
    data: TokenDataset,
    hyper: ArtistTrainConfig,
    val_data: TokenDataset | None = None,
    log_every: int = 0,
) -> list[float]:
    """AdamW training with linear warmup; returns the loss trajectory."""
    rng = np.random.default_rng(np.random.SeedSequence([hyper.seed, 0xA27157]))
    torch.manual_seed(hyper.seed)
    opt = torch.optim.AdamW(
        model.parameters(), lr=hyper.lr, weight_decay=hyper.weight_decay
    )
    curve: list[float] = []
    model.train()
    for step in range(hyper.steps):
        lr = hyper.lr * min(1.0, (step + 1) / max(1, hyper.warmup_steps))
        for group in opt.param_groups:
            group["lr"] = lr
        idx = torch.from_numpy(rng.integers(0, len(data), size=hyper.batch_size))
        drop = None
        if p_drop := model.config.driver_dropout:
            drop = torch.from_numpy(rng.random(hyper.batch_size) < p_drop)
        batch = TrainBatch(
            source_tokens=data.source[idx],
            driver_tokens=data.driver[idx],
            target_tokens=data.target[idx],
            driver_drop=drop,
        )
        nll = batch_nll(model, batch)
        if not torch.isfinite(nll):
            raise DivergenceError(f"non-finite NLL at step {step}")
        opt.zero_grad()
        nll.backward()
        if hyper.grad_clip:
            torch.nn.utils.clip_grad_norm_(model.parameters(), hyper.grad_clip)
        opt.step()
        curve.append(float(nll.detach()))
        if log_every and (step + 1) % log_every == 0:
            msg = f"artist step {step + 1}/{hyper.steps} nll={curve[-1]:.4f}"
            if val_data is not None:
                val_batch = TrainBatch(val_data.source, val_data.driver, val_data.target)
                msg += f" val={eval_nll(model, val_batch):.4f}"
                model.train()
            print(msg)
    model.eval()
    return curve


def save_artist(
    path: str | Path,
    model: ArtistModel,
    vq_image_path: str | Path,
    vq_driver_path: str | Path,
    step: int = 0,
    extra: dict | None = None,
) -> Path:
    cfg = asdict(model.config)
    cfg["layout"] = asdict(model.config.layout)
    merged = dict(extra or {})
    merged["vq_image_sha256"] = file_sha256(vq_image_path)
    merged["vq_driver_sha256"] = file_sha256(vq_driver_path)
    merged["null_driver_trained"] = model.config.driver_dropout > 0
    return save_checkpoint(
        path, kind="artist", config=cfg, state_dict=model.state_dict(), step=step, extra=merged
    )


def load_artist(path: str | Path) -> tuple[ArtistModel, dict]:
    """Returns (model, extra) where extra carries the quantizer content hashes."""
    payload = load_checkpoint(path, expected_kind="artist")
    cfg = dict(payload["config"])
    cfg["layout"] = SequenceLayout(
        **{
            k: tuple(v) if isinstance(v, list) else v
            for k, v in cfg["layout"].items()
        }
    )
    model = ArtistModel(ArtistConfig(**cfg))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload["extra"]
