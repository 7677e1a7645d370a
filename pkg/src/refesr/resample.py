"""Separable resampling: the blur+downsample degradation operator and the
kernel upsamplers built on the same convention.

The convention is pinned once for the whole artifact and documented here:

* cubic convolution kernel with a = -0.5 (and a Lanczos-3 alternative for
  one of the component resolvers),
* half-pixel alignment: output coordinate u samples input coordinate
  (u + 0.5) * step - 0.5, where step is the input pixels advanced per
  output pixel,
* when downscaling with antialiasing the kernel support is widened by the
  scale factor,
* borders replicate: tap indices clamp to the valid range,
* tap weights are normalized so each output is an affine combination of
  inputs; the last tap is nudged so the sequential float64 tap sum is
  exactly 1.0, which makes constant images exact fixed points for dyadic
  constants.

Per output pixel the taps are accumulated in a fixed order, so results are
bitwise independent of any external scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ImageTooSmallError, InvalidParameterError
from .image import Image


def cubic_kernel(x: np.ndarray) -> np.ndarray:
    """Cubic convolution kernel with a = -0.5, support [-2, 2]."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    ax2 = ax * ax
    ax3 = ax2 * ax
    inner = 1.5 * ax3 - 2.5 * ax2 + 1.0
    outer = -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    return np.where(ax <= 1.0, inner, np.where(ax < 2.0, outer, 0.0))


def lanczos3_kernel(x: np.ndarray) -> np.ndarray:
    """Sinc-windowed sinc kernel, support [-3, 3]."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < 3.0, np.sinc(x) * np.sinc(x / 3.0), 0.0)


KERNELS = {
    "cubic": (cubic_kernel, 2.0),
    "lanczos3": (lanczos3_kernel, 3.0),
}


@dataclass(frozen=True)
class DegradationModel:
    """Blur + downsample operator: antialiased cubic resampling by ``scale``."""

    scale: int
    antialias: bool = True
    kernel: str = "cubic"

    def __post_init__(self):
        if not isinstance(self.scale, int) or self.scale < 2:
            raise InvalidParameterError(f"scale must be an integer >= 2, got {self.scale!r}")
        if self.kernel != "cubic":
            # LR generation and ensemble assembly must share one operator;
            # arbitrary blur kernels are out of scope.
            raise InvalidParameterError(f"degradation kernel must be 'cubic', got {self.kernel!r}")


def axis_contributions(
    out_len: int, in_len: int, step: float, kernel: str = "cubic", widen: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices and normalized weights for one resampling axis.

    Returns (idx, wts) of shape (out_len, taps). ``step`` is the input
    pixels advanced per output pixel; ``widen`` multiplies the kernel
    support (the antialias widening). Indices are clamped to the input
    range; weights along each row sum to exactly 1.0 when accumulated in
    tap order.
    """
    func, support = KERNELS[kernel]
    centers = (np.arange(out_len, dtype=np.float64) + 0.5) * step - 0.5
    radius = support * widen
    left = np.floor(centers - radius).astype(np.int64) + 1
    ntaps = int(np.ceil(2.0 * radius)) + 2
    idx = left[:, None] + np.arange(ntaps, dtype=np.int64)[None, :]
    wts = func((centers[:, None] - idx) / widen) / widen
    wts = wts / wts.sum(axis=1, keepdims=True)
    # Make the sequential tap sum exactly 1.0: the final tap absorbs the
    # rounding of the running total (exact by Sterbenz subtraction).
    prefix = np.zeros(out_len, dtype=np.float64)
    for k in range(ntaps - 1):
        prefix += wts[:, k]
    wts[:, ntaps - 1] = 1.0 - prefix
    idx = np.clip(idx, 0, in_len - 1)
    return idx, wts


def _apply_axis(arr: np.ndarray, idx: np.ndarray, wts: np.ndarray, axis: int) -> np.ndarray:
    out_len, ntaps = idx.shape
    shape = list(arr.shape)
    shape[axis] = out_len
    acc = np.zeros(shape, dtype=np.float64)
    for k in range(ntaps):
        if axis == 0:
            acc += wts[:, k][:, None, None] * arr[idx[:, k], :, :]
        else:
            acc += wts[:, k][None, :, None] * arr[:, idx[:, k], :]
    return acc


def _resample(img: Image, out_h: int, out_w: int, step: float, kernel: str, widen: float) -> Image:
    iv, wv = axis_contributions(out_h, img.height, step, kernel, widen)
    ih, wh = axis_contributions(out_w, img.width, step, kernel, widen)
    return Image(_apply_axis(_apply_axis(img.data, iv, wv, 0), ih, wh, 1))


def downsample(img: Image, model: DegradationModel) -> Image:
    """Apply the degradation operator: separable antialiased cubic downscale.

    Output dimensions are floor(input / scale) per axis. The output is NOT
    clamped; the operator stays linear so that downstream least-squares
    assembly sees the exact operator used for LR generation.
    """
    s = model.scale
    if img.width < 2 * s or img.height < 2 * s:
        raise ImageTooSmallError(
            f"image {img.width}x{img.height} too small to downsample by {s} (need >= {2*s} per axis)"
        )
    widen = float(s) if model.antialias else 1.0
    return _resample(img, img.height // s, img.width // s, float(s), model.kernel, widen)


def apply_degradation(img: Image, model: DegradationModel) -> Image:
    """Alias of :func:`downsample`.

    The ensemble solver requires that the operator applied to resolver
    outputs is exactly the operator that generated the LR observation; this
    alias is the documented entry point for that use.
    """
    return downsample(img, model)


def upsample(img: Image, scale: int, kernel: str = "cubic") -> Image:
    """Kernel upscale by an integer factor, same alignment, no antialias."""
    if not isinstance(scale, int) or scale < 2:
        raise InvalidParameterError(f"scale must be an integer >= 2, got {scale!r}")
    if kernel not in KERNELS:
        raise InvalidParameterError(f"unknown kernel {kernel!r}")
    return _resample(img, img.height * scale, img.width * scale, 1.0 / scale, kernel, 1.0)


def upsample_bicubic(img: Image, scale: int) -> Image:
    """Cubic upscale; the baseline resolver and the chroma path."""
    return upsample(img, scale, "cubic")


def upsample_nearest(img: Image, scale: int) -> Image:
    """Nearest-neighbor upscale under the same half-pixel convention."""
    if not isinstance(scale, int) or scale < 2:
        raise InvalidParameterError(f"scale must be an integer >= 2, got {scale!r}")
    rows = ((np.arange(img.height * scale) + 0.5) / scale).astype(np.int64)
    cols = ((np.arange(img.width * scale) + 0.5) / scale).astype(np.int64)
    return Image(img.data[rows][:, cols])


def degradation_matrix(height: int, width: int, model: DegradationModel) -> np.ndarray:
    """Explicit dense matrix of the degradation operator on row-major
    flattened single-channel images: shape (out_h*out_w, height*width).

    Built from the same per-axis taps as the separable path; intended for
    small problems (diagnostics, assembly checks).
    """
    s = model.scale
    widen = float(s) if model.antialias else 1.0
    iv, wv = axis_contributions(height // s, height, float(s), model.kernel, widen)
    ih, wh = axis_contributions(width // s, width, float(s), model.kernel, widen)
    av = np.zeros((height // s, height))
    ah = np.zeros((width // s, width))
    for k in range(iv.shape[1]):
        np.add.at(av, (np.arange(height // s), iv[:, k]), wv[:, k])
    for k in range(ih.shape[1]):
        np.add.at(ah, (np.arange(width // s), ih[:, k]), wh[:, k])
    return np.kron(av, ah)


def add_gaussian_noise(img: Image, sigma: float, seed: int) -> Image:
    """Add i.i.d. Gaussian noise with standard deviation ``sigma`` on the
    0-255 scale. Deterministic given ``seed``; the result is not clamped."""
    if sigma < 0:
        raise InvalidParameterError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img
    rng = np.random.default_rng(seed)
    return Image(img.data + rng.normal(0.0, sigma / 255.0, size=img.data.shape))


def gaussian_blur(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of a 2-D or 3-D array, replicate borders.

    Kernel truncated at ceil(3*sigma) taps per side and normalized.
    """
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    g /= g.sum()
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    for axis in (0, 1):
        n = arr.shape[axis]
        idx = np.clip(np.arange(n)[:, None] + np.arange(-radius, radius + 1)[None, :], 0, n - 1)
        wts = np.broadcast_to(g, idx.shape).copy()
        arr = _apply_axis(arr, idx, wts, axis)
    return arr[:, :, 0] if squeeze else arr
