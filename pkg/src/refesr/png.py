"""Minimal PNG codec for the subset this project needs.

Supported: 8- or 16-bit, grayscale (color type 0) or RGB (color type 2),
non-interlaced, no alpha, no palette. The decoder handles all five scanline
filters; the encoder always writes filter type 0 (None), which keeps output
bytes deterministic.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import TruncatedPayloadError, UnreadableFileError, UnsupportedFormatError

SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunks(data: bytes):
    pos = len(SIGNATURE)
    n = len(data)
    while pos < n:
        if pos + 8 > n:
            raise TruncatedPayloadError("PNG chunk header truncated")
        (length,), ctype = struct.unpack(">I", data[pos : pos + 4]), data[pos + 4 : pos + 8]
        end = pos + 8 + length + 4
        if end > n:
            raise TruncatedPayloadError(f"PNG chunk {ctype!r} truncated")
        payload = data[pos + 8 : pos + 8 + length]
        (crc,) = struct.unpack(">I", data[pos + 8 + length : end])
        if crc != zlib.crc32(ctype + payload) & 0xFFFFFFFF:
            raise UnreadableFileError(f"PNG chunk {ctype!r} fails its CRC check")
        yield ctype, payload
        pos = end


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, height: int, stride: int, bpp: int) -> bytearray:
    out = bytearray(height * stride)
    prev = bytearray(stride)
    pos = 0
    for row in range(height):
        ftype = raw[pos]
        line = bytearray(raw[pos + 1 : pos + 1 + stride])
        pos += 1 + stride
        if ftype == 1:  # Sub
            for i in range(bpp, stride):
                line[i] = (line[i] + line[i - bpp]) & 0xFF
        elif ftype == 2:  # Up
            for i in range(stride):
                line[i] = (line[i] + prev[i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                upleft = prev[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + _paeth(left, prev[i], upleft)) & 0xFF
        elif ftype != 0:
            raise UnreadableFileError(f"PNG scanline uses unknown filter type {ftype}")
        out[row * stride : (row + 1) * stride] = line
        prev = line
    return out


def decode(data: bytes) -> tuple[np.ndarray, int]:
    """Decode PNG bytes into (uint array of shape (h, w, c), bit_depth)."""
    if not data.startswith(SIGNATURE):
        raise UnsupportedFormatError("not a PNG file (bad signature)")
    header = None
    idat = bytearray()
    seen_end = False
    for ctype, payload in _chunks(data):
        if ctype == b"IHDR":
            header = struct.unpack(">IIBBBBB", payload)
        elif ctype == b"IDAT":
            idat.extend(payload)
        elif ctype == b"IEND":
            seen_end = True
            break
    if header is None:
        raise UnreadableFileError("PNG has no IHDR chunk")
    width, height, bit_depth, color_type, compression, filter_method, interlace = header
    if width < 1 or height < 1:
        raise UnsupportedFormatError(f"bad PNG dimensions {width}x{height}")
    if bit_depth not in (8, 16):
        raise UnsupportedFormatError(f"unsupported PNG bit depth {bit_depth}")
    if color_type == 0:
        channels = 1
    elif color_type == 2:
        channels = 3
    else:
        raise UnsupportedFormatError(
            f"unsupported PNG color type {color_type} (palette/alpha images are out of scope)"
        )
    if compression != 0 or filter_method != 0:
        raise UnsupportedFormatError("unsupported PNG compression/filter method")
    if interlace != 0:
        raise UnsupportedFormatError("interlaced PNG is not supported")
    if not seen_end:
        raise TruncatedPayloadError("PNG ends before IEND")
    if not idat:
        raise TruncatedPayloadError("PNG has no IDAT data")
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise UnreadableFileError(f"PNG pixel stream fails to decompress: {exc}") from exc
    bpp = channels * (bit_depth // 8)
    stride = width * bpp
    if len(raw) < height * (stride + 1):
        raise TruncatedPayloadError(
            f"PNG pixel stream holds {len(raw)} bytes, header promises {height * (stride + 1)}"
        )
    pixels = _unfilter(raw, height, stride, bpp)
    dtype = np.dtype(">u2") if bit_depth == 16 else np.dtype("u1")
    arr = np.frombuffer(bytes(pixels), dtype=dtype, count=width * height * channels)
    return arr.reshape(height, width, channels).astype(np.uint16 if bit_depth == 16 else np.uint8), bit_depth


def _chunk(ctype: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + ctype
        + payload
        + struct.pack(">I", zlib.crc32(ctype + payload) & 0xFFFFFFFF)
    )


def encode(arr: np.ndarray, bit_depth: int) -> bytes:
    """Encode a (h, w, c) uint array as non-interlaced PNG, filter 0 rows."""
    height, width, channels = arr.shape
    color_type = 0 if channels == 1 else 2
    ihdr = struct.pack(">IIBBBBB", width, height, bit_depth, color_type, 0, 0, 0)
    dtype = np.dtype(">u2") if bit_depth == 16 else np.dtype("u1")
    rows = arr.astype(dtype).tobytes()
    stride = width * channels * (bit_depth // 8)
    raw = b"".join(b"\x00" + rows[r * stride : (r + 1) * stride] for r in range(height))
    return (
        SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(raw, 6))
        + _chunk(b"IEND", b"")
    )
