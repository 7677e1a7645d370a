"""Image container, color conversion, and file round trips."""

import math
import struct
import zlib

import numpy as np
import pytest

from refesr import png as png_codec
from refesr.errors import (
    ChannelCountError,
    InvalidParameterError,
    TruncatedPayloadError,
    UnreadableFileError,
    UnsupportedFormatError,
)
from refesr.image import Image, load_image, quantize, rgb_to_luma, rgb_to_ycbcr, save_image, ycbcr_to_rgb


class TestImageType:
    def test_invariants(self):
        img = Image(np.zeros((3, 4)))
        assert (img.height, img.width, img.channels) == (3, 4, 1)
        assert img.data.shape == (3, 4, 1)

    def test_data_is_read_only(self):
        img = Image(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1.0

    def test_rejects_bad_shapes(self):
        with pytest.raises(InvalidParameterError):
            Image(np.zeros((2, 2, 2)))
        with pytest.raises(InvalidParameterError):
            Image(np.zeros((0, 3)))

    def test_clamp(self):
        img = Image(np.array([[-0.5, 0.3], [1.2, 1.0]]))
        clamped = img.clamp()
        assert clamped.data.min() == 0.0
        assert clamped.data.max() == 1.0


class TestPnmDecoding:
    def test_pgm_scaling(self):
        data = b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64])
        path = self._write(data)
        img, meta = load_image(path)
        np.testing.assert_array_equal(
            img.plane(), np.array([[0.0, 1.0], [128 / 255, 64 / 255]])
        )
        assert meta.bit_depth == 8
        assert meta.colorspace == "gray"

    def test_ppm_single_pixel(self):
        data = b"P6\n1 1\n255\n" + bytes([255, 0, 0])
        img, _ = load_image(self._write(data))
        np.testing.assert_array_equal(img.data[0, 0], [1.0, 0.0, 0.0])

    def test_truncated_payload(self):
        data = b"P5\n2 2\n255\n" + bytes([0, 255, 128])  # promises 4, holds 3
        with pytest.raises(TruncatedPayloadError):
            load_image(self._write(data))

    def test_header_comments(self):
        data = b"P5\n# a comment\n2 1 # inline\n255\n" + bytes([10, 20])
        img, _ = load_image(self._write(data))
        np.testing.assert_allclose(img.plane(), [[10 / 255, 20 / 255]])

    def test_ascii_pnm_rejected(self):
        with pytest.raises(UnsupportedFormatError):
            load_image(self._write(b"P2\n1 1\n255\n7\n"))

    def test_missing_file(self):
        with pytest.raises(UnreadableFileError):
            load_image(self._dir / "nope.pgm")

    def test_sixteen_bit_big_endian(self):
        data = b"P5\n1 1\n65535\n" + struct.pack(">H", 513)
        img, meta = load_image(self._write(data))
        assert meta.bit_depth == 16
        assert img.plane()[0, 0] == 513 / 65535

    def test_deterministic(self):
        data = b"P5\n2 2\n255\n" + bytes([9, 8, 7, 6])
        a, _ = load_image(self._write(data))
        b, _ = load_image(self._write(data))
        np.testing.assert_array_equal(a.data, b.data)

    @pytest.fixture(autouse=True)
    def _tmp(self, tmp_path):
        self._dir = tmp_path
        self._count = 0

    def _write(self, data: bytes):
        self._count += 1
        path = self._dir / f"f{self._count}.pgm"
        path.write_bytes(data)
        return path


class TestQuantization:
    def test_clamp_above_one(self):
        img = Image(np.array([[1.2]]))
        assert quantize(img, 8)[0, 0, 0] == 255

    def test_round_half_up(self):
        """0.5 * 255 = 127.5 stores as 128 under the round-half-up rule."""
        img = Image(np.array([[0.5]]))
        assert quantize(img, 8)[0, 0, 0] == 128

    def test_negative_clamps_to_zero(self):
        img = Image(np.array([[-0.25]]))
        assert quantize(img, 8)[0, 0, 0] == 0


class TestRoundTrips:
    """load(save(x)) reproduces quantized samples exactly, all formats."""

    @pytest.mark.parametrize("suffix,channels,depth", [
        (".pgm", 1, 8), (".pgm", 1, 16), (".ppm", 3, 8), (".ppm", 3, 16),
        (".png", 1, 8), (".png", 1, 16), (".png", 3, 8), (".png", 3, 16),
    ])
    def test_quantized_round_trip(self, tmp_path, suffix, channels, depth):
        rng = np.random.default_rng(42)
        for trial in range(6):
            h, w = rng.integers(1, 24, size=2)
            maxval = (1 << depth) - 1
            raw = rng.integers(0, maxval + 1, size=(h, w, channels))
            img = Image(raw / maxval)
            path = tmp_path / f"t{trial}{suffix}"
            save_image(img, path, bit_depth=depth)
            back, meta = load_image(path)
            assert meta.bit_depth == depth
            np.testing.assert_array_equal(back.data, raw / maxval)

    def test_save_rewrites_identical_bytes(self, tmp_path):
        img = Image(np.linspace(0, 1, 64).reshape(8, 8))
        p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
        save_image(img, p1)
        save_image(img, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_suffix_channel_mismatch(self, tmp_path):
        with pytest.raises(ChannelCountError):
            save_image(Image(np.zeros((2, 2, 3))), tmp_path / "x.pgm")
        with pytest.raises(ChannelCountError):
            save_image(Image(np.zeros((2, 2))), tmp_path / "x.ppm")

    def test_unknown_suffix(self, tmp_path):
        with pytest.raises(UnsupportedFormatError):
            save_image(Image(np.zeros((2, 2))), tmp_path / "x.bmp")


def _filter_scanlines(pixels: np.ndarray, ftype: int, bpp: int) -> bytes:
    """Forward PNG filtering written from the format definition; used to
    exercise the decoder's unfilter paths independently of the encoder."""
    height, stride = pixels.shape
    out = bytearray()
    prev = np.zeros(stride, dtype=np.int64)
    for r in range(height):
        line = pixels[r].astype(np.int64)
        enc = np.zeros(stride, dtype=np.int64)
        for i in range(stride):
            left = line[i - bpp] if i >= bpp else 0
            up = prev[i]
            upleft = prev[i - bpp] if i >= bpp else 0
            if ftype == 0:
                pred = 0
            elif ftype == 1:
                pred = left
            elif ftype == 2:
                pred = up
            elif ftype == 3:
                pred = (left + up) // 2
            else:
                p = left + up - upleft
                pa, pb, pc = abs(p - left), abs(p - up), abs(p - upleft)
                pred = left if pa <= pb and pa <= pc else (up if pb <= pc else upleft)
            enc[i] = (line[i] - pred) % 256
        out.append(ftype)
        out.extend(int(v) for v in enc)
        prev = line
    return bytes(out)


class TestPngDecoder:
    @pytest.mark.parametrize("ftype", [0, 1, 2, 3, 4])
    def test_all_filter_types(self, ftype):
        rng = np.random.default_rng(ftype)
        h, w = 7, 5
        pixels = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
        raw = _filter_scanlines(pixels.reshape(h, w), ftype, bpp=1)
        ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
        data = (
            png_codec.SIGNATURE
            + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(raw))
            + _chunk(b"IEND", b"")
        )
        arr, depth = png_codec.decode(data)
        assert depth == 8
        np.testing.assert_array_equal(arr[:, :, 0], pixels)

    def test_rejects_palette(self):
        ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 3, 0, 0, 0)
        data = png_codec.SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IEND", b"")
        with pytest.raises(UnsupportedFormatError):
            png_codec.decode(data)

    def test_rejects_interlace(self):
        ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 0, 0, 0, 1)
        data = png_codec.SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IEND", b"")
        with pytest.raises(UnsupportedFormatError):
            png_codec.decode(data)

    def test_truncated_pixel_stream(self):
        ihdr = struct.pack(">IIBBBBB", 4, 4, 8, 0, 0, 0, 0)
        short = zlib.compress(b"\x00" + bytes(3))  # one row instead of four
        data = (
            png_codec.SIGNATURE
            + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", short)
            + _chunk(b"IEND", b"")
        )
        with pytest.raises(TruncatedPayloadError):
            png_codec.decode(data)

    def test_bad_crc(self):
        ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 0, 0, 0, 0)
        chunk = bytearray(_chunk(b"IHDR", ihdr))
        chunk[-1] ^= 0xFF
        with pytest.raises(UnreadableFileError):
            png_codec.decode(png_codec.SIGNATURE + bytes(chunk))


def _chunk(ctype: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + ctype
        + payload
        + struct.pack(">I", zlib.crc32(ctype + payload) & 0xFFFFFFFF)
    )


class TestLuma:
    def test_white(self):
        img = Image(np.ones((2, 2, 3)))
        np.testing.assert_allclose(rgb_to_luma(img).plane(), 235 / 255, atol=1e-12)

    def test_black(self):
        img = Image(np.zeros((2, 2, 3)))
        np.testing.assert_allclose(rgb_to_luma(img).plane(), 16 / 255, atol=1e-12)

    def test_output_range(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            img = Image(rng.random((6, 6, 3)))
            y = rgb_to_luma(img).plane()
            assert y.min() >= 16 / 255 - 1e-12
            assert y.max() <= 235 / 255 + 1e-12

    def test_wrong_channel_count(self):
        with pytest.raises(ChannelCountError):
            rgb_to_luma(Image(np.zeros((2, 2))))

    def test_matches_ycbcr_luma_plane(self):
        rng = np.random.default_rng(4)
        img = Image(rng.random((5, 5, 3)))
        y, _, _ = rgb_to_ycbcr(img)
        np.testing.assert_array_equal(rgb_to_luma(img).plane(), y)

    def test_ycbcr_round_trip(self):
        rng = np.random.default_rng(5)
        img = Image(rng.random((8, 8, 3)))
        back = ycbcr_to_rgb(*rgb_to_ycbcr(img))
        # the published coefficient pairs are rounded; ~2e-6 is their floor
        np.testing.assert_allclose(back.data, img.data, atol=5e-6)
