"""PSNR and SSIM on single-channel [0, 1] images.

Both metrics operate on a border-shaved region (``shave`` pixels removed
per side). PSNR of identical regions is reported as ``math.inf`` in memory
and is never serialized as a float infinity: :class:`MetricReport` carries
an ``identical`` flag and a null PSNR instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChannelCountError, DimensionMismatchError, ImageTooSmallError, InvalidParameterError
from .image import Image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2  # (0.01 * L)^2 with L = 1
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class MetricReport:
    psnr: float  # decibels; math.inf when the shaved regions are identical
    ssim: float
    shave: int

    @property
    def identical(self) -> bool:
        return math.isinf(self.psnr)

    def to_json_dict(self) -> dict:
        return {
            "psnr_db": None if self.identical else self.psnr,
            "identical": self.identical,
            "ssim": self.ssim,
            "shave": self.shave,
        }


def _shaved_pair(a: Image, b: Image, shave: int) -> tuple[np.ndarray, np.ndarray]:
    if a.channels != 1 or b.channels != 1:
        raise ChannelCountError("metrics operate on single-channel images; convert to luma first")
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatchError(
            f"metric inputs differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    if shave < 0 or 2 * shave >= min(a.width, a.height):
        raise InvalidParameterError(
            f"shave {shave} leaves no pixels in a {a.width}x{a.height} image"
        )
    sl = slice(shave, a.height - shave), slice(shave, a.width - shave)
    return a.plane()[sl], b.plane()[sl]


def psnr(a: Image, b: Image, shave: int = 0) -> float:
    """10*log10(1 / MSE) over the shaved region; inf when MSE is zero."""
    pa, pb = _shaved_pair(a, b, shave)
    mse = float(np.mean((pa - pb) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """1-D Gaussian window normalized to sum 1."""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _valid_filter(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with the window ``g`` on both axes."""
    size = g.size
    acc = np.zeros((x.shape[0] - size + 1, x.shape[1]))
    for k in range(size):
        acc += g[k] * x[k : k + acc.shape[0], :]
    out = np.zeros((acc.shape[0], x.shape[1] - size + 1))
    for k in range(size):
        out += g[k] * acc[:, k : k + out.shape[1]]
    return out


def ssim(a: Image, b: Image, shave: int = 0) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), valid mode.

    Uses the original constants C1 = 0.01^2, C2 = 0.03^2 for L = 1 and
    population (weighted) statistics.
    """
    pa, pb = _shaved_pair(a, b, shave)
    if min(pa.shape) < SSIM_WINDOW:
        raise ImageTooSmallError(
            f"SSIM needs at least {SSIM_WINDOW} pixels per axis after shaving, got {pa.shape[1]}x{pa.shape[0]}"
        )
    g = gaussian_window()
    mu_a = _valid_filter(pa, g)
    mu_b = _valid_filter(pb, g)
    mu_aa = _valid_filter(pa * pa, g)
    mu_bb = _valid_filter(pb * pb, g)
    mu_ab = _valid_filter(pa * pb, g)
    var_a = mu_aa - mu_a * mu_a
    var_b = mu_bb - mu_b * mu_b
    cov = mu_ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def compare(a: Image, b: Image, shave: int = 0) -> MetricReport:
    """PSNR and SSIM of ``a`` against ``b`` over the shaved region."""
    return MetricReport(psnr=psnr(a, b, shave), ssim=ssim(a, b, shave), shave=shave)
