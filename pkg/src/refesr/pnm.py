"""Binary PGM (P5) and PPM (P6) codec.

Maxval 255 or 65535 only; 16-bit samples are big-endian, as mandated by
the netpbm format. Header comments (``#`` to end of line) are accepted.
"""

from __future__ import annotations

import numpy as np

from .errors import TruncatedPayloadError, UnsupportedFormatError

_WHITESPACE = b" \t\r\n\v\f"


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in b"\r\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    if pos >= n:
        raise TruncatedPayloadError("PNM header ended before all fields were read")
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def decode(data: bytes) -> tuple[np.ndarray, int]:
    """Decode P5/P6 bytes into (uint array of shape (h, w, c), bit_depth)."""
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise UnsupportedFormatError(
            f"not a binary PGM/PPM file (magic {magic!r}); ASCII P2/P3 are not supported"
        )
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError as exc:
            raise UnsupportedFormatError(f"bad PNM header field {token!r}") from exc
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise UnsupportedFormatError(f"bad PNM dimensions {width}x{height}")
    if maxval == 255:
        bit_depth = 8
    elif maxval == 65535:
        bit_depth = 16
    else:
        raise UnsupportedFormatError(f"unsupported PNM maxval {maxval} (need 255 or 65535)")
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise TruncatedPayloadError("PNM header not terminated by whitespace")
    pos += 1
    count = width * height * channels
    nbytes = count * (bit_depth // 8)
    payload = data[pos : pos + nbytes]
    if len(payload) < nbytes:
        raise TruncatedPayloadError(
            f"PNM payload holds {len(payload)} bytes, header promises {nbytes}"
        )
    dtype = np.dtype(">u2") if bit_depth == 16 else np.dtype("u1")
    arr = np.frombuffer(payload, dtype=dtype, count=count)
    return arr.reshape(height, width, channels).astype(np.uint16 if bit_depth == 16 else np.uint8), bit_depth


def encode(arr: np.ndarray, bit_depth: int) -> bytes:
    """Encode a (h, w, c) uint array as binary PGM (c=1) or PPM (c=3)."""
    height, width, channels = arr.shape
    magic = b"P5" if channels == 1 else b"P6"
    maxval = (1 << bit_depth) - 1
    header = magic + b"\n%d %d\n%d\n" % (width, height, maxval)
    dtype = np.dtype(">u2") if bit_depth == 16 else np.dtype("u1")
    return header + arr.astype(dtype).tobytes()
