"""Independent brute-force oracles shared across test modules.

These deliberately re-derive results through a different path than the
library (explicit loops, direct formulas) so agreement is meaningful.
"""
import numpy as np


def naive_area_resize(pixels, out_size):
    """O(n^4) box-average resampler."""
    h, w = pixels.shape[-2:]
    oh, ow = out_size
    out = np.zeros(pixels.shape[:-2] + (oh, ow), dtype=np.float64)
    for i in range(oh):
        for j in range(ow):
            y0, y1 = i * h / oh, (i + 1) * h / oh
            x0, x1 = j * w / ow, (j + 1) * w / ow
            acc = 0.0
            for yy in range(int(np.floor(y0)), int(np.ceil(y1))):
                wy = min(y1, yy + 1) - max(y0, yy)
                for xx in range(int(np.floor(x0)), int(np.ceil(x1))):
                    wx = min(x1, xx + 1) - max(x0, xx)
                    acc = acc + wy * wx * pixels[..., yy, xx]
            out[..., i, j] = acc * (oh / h) * (ow / w)
    return out


def brute_force_nearest(latents, codebook):
    """Nearest codebook row per latent by direct squared distances, first-index ties."""
    lat = np.asarray(latents, dtype=np.float64)
    book = np.asarray(codebook, dtype=np.float64)
    out = np.empty(lat.shape[0], dtype=np.int64)
    for i in range(lat.shape[0]):
        d = ((book - lat[i]) ** 2).sum(axis=1)
        out[i] = int(np.argmin(d))
    return out


def enumerate_nucleus(hist, p):
    """Token indices kept by top-p, via explicit sort + running sum."""
    h = np.asarray(hist, dtype=np.float64)
    order = sorted(range(h.size), key=lambda i: (-h[i], i))
    kept, running = [], 0.0
    for idx in order:
        kept.append(idx)
        running += h[idx]
        if running >= p:
            break
    return sorted(kept)


def enumerate_topk(hist, k):
    h = np.asarray(hist, dtype=np.float64)
    order = sorted(range(h.size), key=lambda i: (-h[i], i))
    return sorted(order[: min(k, h.size)])


def square_fits_inside_mask(mask, top, left, side):
    """Every cell of the square is masked (explicit double loop)."""
    h, w = mask.shape
    if top < 0 or left < 0 or top + side > h or left + side > w:
        return False
    for y in range(top, top + side):
        for x in range(left, left + side):
            if not mask[y, x]:
                return False
    return True


def gaussian_frechet_1d(mu1, sigma1, mu2, sigma2):
    """Closed form for 1-D Gaussians: (mu1-mu2)^2 + (sigma1-sigma2)^2."""
    return (mu1 - mu2) ** 2 + (sigma1 - sigma2) ** 2
