"""Discrete autoencoders: convolutional encoder, codebook quantizer, decoder.

Two instances are trained independently, one for full images and one for
drivers. The objective is the plain vector-quantization loss (reconstruction
+ codebook + weighted commitment terms) with a straight-through estimator
through the non-differentiable assignment step.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .checkpoint import load_checkpoint, save_checkpoint
from .dataio import DatasetManifest
from .editsynth import BlockRegionConfig, TransformConfig, make_quadruplet, sample_block_region
from .errors import DivergenceError, InvalidToken, ShapeError
from .imageops import Image


@dataclass(frozen=True)
class CodebookConfig:
    codebook_size: int = 256          # K
    code_dim: int = 64
    downsample_factor: int = 8        # f, spatial compression per side (power of two)
    hidden_channels: int = 64

    def __post_init__(self):
        if self.codebook_size < 2 and self.codebook_size != 1:
            raise ValueError("codebook_size must be >= 1")
        f = self.downsample_factor
        if f < 1 or (f & (f - 1)) != 0:
            raise ValueError(f"downsample_factor must be a power of two, got {f}")

    @property
    def n_levels(self) -> int:
        return int(self.downsample_factor).bit_length() - 1


def quantize(latents: torch.Tensor, codebook: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Nearest-codebook assignment by squared Euclidean distance.

    latents: (..., code_dim); codebook: (K, code_dim). Distances are
    accumulated in float64; ties go to the lowest codebook index. Returns
    (tokens (...,), quantized latents in the input dtype).
    """
    if latents.shape[-1] != codebook.shape[-1]:
        raise ShapeError(
            f"code_dim mismatch: latents {latents.shape[-1]} vs codebook {codebook.shape[-1]}"
        )
    flat = latents.reshape(-1, latents.shape[-1]).detach().to(torch.float64)
    book = codebook.detach().to(torch.float64)
    d = (
        (flat * flat).sum(dim=1, keepdim=True)
        - 2.0 * flat @ book.T
        + (book * book).sum(dim=1)
    )
    k = book.shape[0]
    mins = d.min(dim=1, keepdim=True).values
    candidates = torch.where(d == mins, torch.arange(k, device=d.device), k)
    tokens = candidates.min(dim=1).values
    quantized = codebook[tokens].reshape(latents.shape).to(latents.dtype)
    return tokens.reshape(latents.shape[:-1]), quantized


@dataclass
class VqLossBreakdown:
    recon: torch.Tensor
    codebook: torch.Tensor
    commit: torch.Tensor
    total: torch.Tensor


def vq_loss(
    x: torch.Tensor,
    x_hat: torch.Tensor,
    encoder_out: torch.Tensor,
    quantized: torch.Tensor,
    beta: float = 0.25,
) -> VqLossBreakdown:
    """recon + codebook + beta * commitment, each a mean over elements.

    The codebook term pulls codebook rows toward (stop-gradient) encoder
    outputs; the commitment term pulls encoder outputs toward (stop-gradient)
    selected rows. Reconstruction gradients reach the encoder because the
    decoder input is encoder_out + sg[quantized - encoder_out].
    """
    if x.shape != x_hat.shape or encoder_out.shape != quantized.shape:
        raise ShapeError("vq_loss arguments have inconsistent shapes")
    recon = F.mse_loss(x_hat, x)
    codebook = F.mse_loss(quantized, encoder_out.detach())
    commit = F.mse_loss(encoder_out, quantized.detach())
    total = recon + codebook + beta * commit
    return VqLossBreakdown(recon=recon, codebook=codebook, commit=commit, total=total)


# No normalization layers anywhere: norms couple all spatial positions through
# global statistics, so encoding a masked image would perturb tokens far from
# the hole and the masked source would no longer agree with the target outside
# the edit region. Locality of the token representation matters more here than
# the optimization convenience norms buy.


class _Encoder(nn.Module):
    def __init__(self, cfg: CodebookConfig):
        super().__init__()
        c = cfg.hidden_channels
        layers: list[nn.Module] = [nn.Conv2d(3, c, 3, 1, 1), nn.ReLU()]
        for _ in range(cfg.n_levels):
            layers += [nn.Conv2d(c, c, 4, 2, 1), nn.ReLU()]
        layers += [nn.Conv2d(c, cfg.code_dim, 1)]
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class _Decoder(nn.Module):
    def __init__(self, cfg: CodebookConfig):
        super().__init__()
        c = cfg.hidden_channels
        layers: list[nn.Module] = [nn.Conv2d(cfg.code_dim, c, 3, 1, 1), nn.ReLU()]
        for _ in range(cfg.n_levels):
            layers += [nn.ConvTranspose2d(c, c, 4, 2, 1), nn.ReLU()]
        layers += [nn.Conv2d(c, c, 3, 1, 1), nn.ReLU(), nn.Conv2d(c, 3, 1)]
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class VqModel(nn.Module):
    """Encoder, codebook, and paired decoder."""

    def __init__(self, config: CodebookConfig):
        super().__init__()
        self.config = config
        self.encoder = _Encoder(config)
        self.decoder = _Decoder(config)
        k = config.codebook_size
        self.codebook = nn.Parameter(
            torch.empty(k, config.code_dim).uniform_(-1.0 / k, 1.0 / k)
        )

    def encode_latents(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, h, w, code_dim)."""
        f = self.config.downsample_factor
        if images.ndim != 4 or images.shape[2] % f or images.shape[3] % f:
            raise ShapeError(
                f"image batch {tuple(images.shape)} not divisible by downsample factor {f}"
            )
        return self.encoder(images).permute(0, 2, 3, 1)

    def encode_tokens(self, images: torch.Tensor) -> torch.Tensor:
        tokens, _ = quantize(self.encode_latents(images), self.codebook)
        return tokens

    def decode_tokens(self, tokens: torch.Tensor) -> torch.Tensor:
        """(B, h, w) int -> (B, 3, h*f, w*f) clamped to [0, 1]."""
        if tokens.min() < 0 or tokens.max() >= self.config.codebook_size:
            raise InvalidToken(
                f"token ids must lie in [0, {self.config.codebook_size}), got "
                f"[{int(tokens.min())}, {int(tokens.max())}]"
            )
        latents = self.codebook[tokens].permute(0, 3, 1, 2)
        return self.decoder(latents).clamp(0.0, 1.0)

    def forward(self, images: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """Returns (x_hat, encoder_out, quantized, tokens) with straight-through decode."""
        z_e = self.encode_latents(images)
        tokens, z_q = quantize(z_e, self.codebook)
        z_q = self.codebook[tokens].reshape(z_e.shape).to(z_e.dtype)  # grads to codebook
        straight_through = z_e + (z_q - z_e).detach()
        x_hat = self.decoder(straight_through.permute(0, 3, 1, 2))
        return x_hat, z_e, z_q, tokens


def build_vq_model(config: CodebookConfig, seed: int = 0) -> VqModel:
    torch.manual_seed(seed)
    return VqModel(config)


# --- spec-facing numpy wrappers ----------------------------------------------

def encode(model: VqModel, image: Image) -> np.ndarray:
    """Image -> (h, w) int64 token grid."""
    with torch.no_grad():
        batch = torch.from_numpy(image.pixels[None])
        return model.encode_tokens(batch)[0].numpy()


def decode(model: VqModel, grid: np.ndarray) -> Image:
    """(h, w) token grid -> Image of size (h*f, w*f)."""
    with torch.no_grad():
        tokens = torch.from_numpy(np.asarray(grid, dtype=np.int64)[None])
        pixels = model.decode_tokens(tokens)[0].numpy()
    return Image(pixels=pixels, id="decoded")


# --- training -----------------------------------------------------------------

@dataclass
class VqTrainConfig:
    lr: float = 1e-3
    batch_size: int = 16
    steps: int = 1500
    beta: float = 0.25
    seed: int = 0


def train_vq(
    model: VqModel,
    manifest: DatasetManifest,
    hyper: VqTrainConfig,
    role: str = "image",
    transform_cfg: TransformConfig | None = None,
    region_cfg: BlockRegionConfig = BlockRegionConfig(),
    log_every: int = 0,
) -> list[float]:
    """Optimize the VQ objective on the manifest's train split; returns the loss curve.

    role="image" trains on full images; role="driver" trains on the driver
    distribution (random region sub-crops resized to the driver size).
    """
    entries = manifest.split_entries("train")
    if not entries:
        raise ValueError("manifest has no train entries")
    if role not in ("image", "driver"):
        raise ValueError(f"unknown role {role!r}")
    if role == "driver" and transform_cfg is None:
        transform_cfg = TransformConfig(alpha_min=0.4, alpha_max=0.7)

    images = [manifest.load(e) for e in entries]
    full = torch.from_numpy(np.stack([im.pixels for im in images]))

    rng = np.random.default_rng(np.random.SeedSequence([hyper.seed, 0xD47A]))
    torch.manual_seed(hyper.seed)
    opt = torch.optim.Adam(model.parameters(), lr=hyper.lr)
    curve: list[float] = []

    for step in range(hyper.steps):
        idx = rng.integers(0, len(images), size=hyper.batch_size)
        if role == "image":
            batch = full[idx]
        else:
            drivers = []
            for i in idx:
                region = sample_block_region(
                    manifest.image_size, region_cfg.area_range, region_cfg.aspect_range, rng
                )
                quad = make_quadruplet(images[int(i)], region, transform_cfg, rng)
                drivers.append(quad.driver.pixels)
            batch = torch.from_numpy(np.stack(drivers))

        x_hat, z_e, z_q, _ = model(batch)
        loss = vq_loss(batch, x_hat, z_e, z_q, beta=hyper.beta)
        if not torch.isfinite(loss.total):
            raise DivergenceError(f"non-finite VQ loss at step {step}")
        opt.zero_grad()
        loss.total.backward()
        opt.step()
        curve.append(float(loss.total.detach()))
        if log_every and (step + 1) % log_every == 0:
            print(
                f"vq[{role}] step {step + 1}/{hyper.steps} "
                f"recon={float(loss.recon):.5f} total={float(loss.total):.5f}"
            )
    return curve


def save_vq(path: str | Path, model: VqModel, step: int = 0, extra: dict | None = None) -> Path:
    return save_checkpoint(
        path,
        kind="vq",
        config=asdict(model.config),
        state_dict=model.state_dict(),
        step=step,
        extra=extra,
    )


def load_vq(path: str | Path) -> VqModel:
    payload = load_checkpoint(path, expected_kind="vq")
    model = VqModel(CodebookConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
