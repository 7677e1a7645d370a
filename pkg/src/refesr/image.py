"""Image container, color conversion, and bit-exact file I/O.

All internal math runs on float64 samples nominally scaled to [0, 1];
quantization happens only at file boundaries. Images are immutable after
construction (the backing array is marked read-only), so they are safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import png, pnm
from .errors import (
    ChannelCountError,
    InvalidParameterError,
    IOFailureError,
    UnreadableFileError,
    UnsupportedFormatError,
)

# ITU-R BT.601 studio-swing luma coefficients on [0, 1] inputs.
_LUMA_R, _LUMA_G, _LUMA_B, _LUMA_OFFSET = 65.481, 128.553, 24.966, 16.0


@dataclass(frozen=True)
class Image:
    """2-D raster of float64 samples, shape (height, width, channels).

    Samples live in a nominal [0, 1] range but may transiently exceed it
    (e.g. inside linear operators); call :meth:`clamp` to restore the range.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise InvalidParameterError(
                f"image data must be (h, w) or (h, w, c) with c in {{1, 3}}, got shape {np.shape(self.data)}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidParameterError(f"image must be at least 1x1, got {arr.shape[1]}x{arr.shape[0]}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def plane(self, index: int = 0) -> np.ndarray:
        """Read-only 2-D view of one channel."""
        return self.data[:, :, index]

    def clamp(self) -> "Image":
        """Return a copy with every sample clipped to [0, 1]."""
        return Image(np.clip(self.data, 0.0, 1.0))


@dataclass(frozen=True)
class ImageMeta:
    """File-level facts that survive a load: origin, depth, colorspace."""

    source_path: str
    bit_depth: int
    colorspace: str  # "gray", "rgb", or "ycbcr-y"

    def __post_init__(self):
        if self.bit_depth not in (8, 16):
            raise InvalidParameterError(f"bit depth must be 8 or 16, got {self.bit_depth}")


def load_image(path: str | Path) -> tuple[Image, ImageMeta]:
    """Load a PGM (P5), PPM (P6) or supported PNG file.

    Samples are scaled to [0, 1] by dividing by (2**bit_depth - 1); pixel
    order is preserved. Decoding is deterministic: same bytes, same samples.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc
    if data.startswith(png.SIGNATURE):
        arr, bit_depth = png.decode(data)
    elif data[:2] in (b"P5", b"P6"):
        arr, bit_depth = pnm.decode(data)
    else:
        raise UnsupportedFormatError(
            f"{path}: unrecognized format (need binary PGM/PPM or 8/16-bit gray/RGB PNG)"
        )
    scale = float((1 << bit_depth) - 1)
    img = Image(arr.astype(np.float64) / scale)
    meta = ImageMeta(str(path), bit_depth, "gray" if img.channels == 1 else "rgb")
    return img, meta


def quantize(img: Image, bit_depth: int) -> np.ndarray:
    """Clamp to [0, 1] and quantize with round-half-up to integer samples."""
    if bit_depth not in (8, 16):
        raise InvalidParameterError(f"bit depth must be 8 or 16, got {bit_depth}")
    maxval = (1 << bit_depth) - 1
    q = np.floor(np.clip(img.data, 0.0, 1.0) * maxval + 0.5)
    return q.astype(np.uint16 if bit_depth == 16 else np.uint8)


def save_image(img: Image, path: str | Path, bit_depth: int = 8) -> None:
    """Write an image as PGM/PPM/PNG chosen by the file suffix.

    Samples are clamped and quantized with round-half-up; loading the file
    back reproduces the quantized values exactly.
    """
    path = Path(path)
    arr = quantize(img, bit_depth)
    suffix = path.suffix.lower()
    if suffix == ".png":
        payload = png.encode(arr, bit_depth)
    elif suffix == ".pgm":
        if img.channels != 1:
            raise ChannelCountError("PGM stores single-channel images; convert to luma first")
        payload = pnm.encode(arr, bit_depth)
    elif suffix == ".ppm":
        if img.channels != 3:
            raise ChannelCountError("PPM stores 3-channel images")
        payload = pnm.encode(arr, bit_depth)
    else:
        raise UnsupportedFormatError(f"cannot infer output format from suffix {suffix!r}")
    try:
        path.write_bytes(payload)
    except OSError as exc:
        raise IOFailureError(f"cannot write {path}: {exc}") from exc


def rgb_to_luma(img: Image) -> Image:
    """BT.601 luma channel of an RGB image, on [0, 1] samples.

    Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255, so outputs live in
    [16/255, 235/255] for inputs in range.
    """
    if img.channels != 3:
        raise ChannelCountError(f"luma conversion needs 3 channels, got {img.channels}")
    r, g, b = img.data[:, :, 0], img.data[:, :, 1], img.data[:, :, 2]
    y = (_LUMA_R * r + _LUMA_G * g + _LUMA_B * b + _LUMA_OFFSET) / 255.0
    return Image(y)


def rgb_to_ycbcr(img: Image) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split RGB into BT.601 studio-swing Y, Cb, Cr planes (each 2-D)."""
    if img.channels != 3:
        raise ChannelCountError(f"YCbCr conversion needs 3 channels, got {img.channels}")
    r, g, b = img.data[:, :, 0], img.data[:, :, 1], img.data[:, :, 2]
    y = (_LUMA_R * r + _LUMA_G * g + _LUMA_B * b + _LUMA_OFFSET) / 255.0
    cb = (-37.797 * r - 74.203 * g + 112.0 * b + 128.0) / 255.0
    cr = (112.0 * r - 93.786 * g - 18.214 * b + 128.0) / 255.0
    return y, cb, cr


def ycbcr_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> Image:
    """Inverse of :func:`rgb_to_ycbcr`; output is clamped to [0, 1]."""
    yy = y * 255.0 - 16.0
    cbb = cb * 255.0 - 128.0
    crr = cr * 255.0 - 128.0
    r = (298.082 * yy / 256.0 + 408.583 * crr / 256.0) / 255.0
    g = (298.082 * yy / 256.0 - 100.291 * cbb / 256.0 - 208.120 * crr / 256.0) / 255.0
    b = (298.082 * yy / 256.0 + 516.412 * cbb / 256.0) / 255.0
    return Image(np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0))
