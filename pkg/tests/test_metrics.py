"""PSNR/SSIM behavior and equivalence with the dense reference SSIM."""

import json
import math

import numpy as np
import pytest

from oracles import reference_ssim
from refesr.errors import (
    ChannelCountError,
    DimensionMismatchError,
    ImageTooSmallError,
    InvalidParameterError,
)
from refesr.image import Image
from refesr.metrics import MetricReport, compare, psnr, ssim
from refesr.resample import add_gaussian_noise


class TestPsnr:
    def test_identical_images_are_inf(self):
        img = Image(np.full((8, 8), 0.3))
        assert math.isinf(psnr(img, img))

    def test_zero_vs_one_is_zero_db(self):
        a = Image(np.zeros((8, 8)))
        b = Image(np.ones((8, 8)))
        assert psnr(a, b) == 0.0

    def test_constant_offset_closed_form(self):
        """Uniform 16/255 offset: PSNR = 10*log10(255^2/16^2) by arithmetic."""
        a = Image(np.zeros((16, 16)))
        b = Image(np.full((16, 16), 16 / 255))
        expected = 10 * math.log10(255**2 / 16**2)
        assert abs(psnr(a, b) - expected) < 1e-9

    def test_symmetry_exact(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            a = Image(rng.random((10, 12)))
            b = Image(rng.random((10, 12)))
            assert psnr(a, b) == psnr(b, a)

    def test_shave_excludes_borders(self):
        rng = np.random.default_rng(2)
        inner = rng.random((6, 6))
        a = np.pad(inner, 2, constant_values=0.0)
        b = np.pad(inner, 2, constant_values=1.0)
        assert math.isinf(psnr(Image(a), Image(b), shave=2))
        assert not math.isinf(psnr(Image(a), Image(b), shave=1))

    def test_decreases_with_noise(self):
        """More noise, lower PSNR (checked across seeds)."""
        base = Image(np.full((64, 64), 0.5))
        for seed in range(5):
            p_small = psnr(base, add_gaussian_noise(base, 2.0, seed).clamp())
            p_big = psnr(base, add_gaussian_noise(base, 10.0, seed).clamp())
            assert p_big < p_small

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            psnr(Image(np.zeros((4, 4))), Image(np.zeros((4, 5))))

    def test_multichannel_rejected(self):
        with pytest.raises(ChannelCountError):
            psnr(Image(np.zeros((4, 4, 3))), Image(np.zeros((4, 4, 3))))

    def test_bad_shave(self):
        with pytest.raises(InvalidParameterError):
            psnr(Image(np.zeros((4, 4))), Image(np.zeros((4, 4))), shave=2)


class TestSsim:
    def test_self_similarity_is_exactly_one(self):
        rng = np.random.default_rng(3)
        img = Image(rng.random((16, 16)))
        assert ssim(img, img) == 1.0

    def test_symmetry_exact(self):
        rng = np.random.default_rng(4)
        a = Image(rng.random((14, 14)))
        b = Image(rng.random((14, 14)))
        assert ssim(a, b) == ssim(b, a)

    def test_binary_inversion_matches_oracle(self):
        """b = 1 - a for a binary image: the optimized path agrees with the
        straightforward dense implementation within 1e-6."""
        yy, xx = np.meshgrid(np.arange(20), np.arange(20), indexing="ij")
        a = Image(((xx + yy) % 2).astype(float))
        b = Image(1.0 - a.data)
        got = ssim(a, b)
        want = reference_ssim(a.plane(), b.plane())
        assert abs(got - want) < 1e-6

    def test_random_pairs_match_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(4):
            a = Image(rng.random((18, 15)))
            b = Image(np.clip(a.data + rng.normal(0, 0.1, a.data.shape), 0, 1))
            assert abs(ssim(a, b) - reference_ssim(a.plane(), b.plane())) < 1e-6

    def test_fixture_pairs_match_oracle(self, corpus):
        for (_, a), (_, b) in zip(corpus[:2], corpus[2:4]):
            assert abs(ssim(a, b) - reference_ssim(a.plane(), b.plane())) < 1e-6

    def test_too_small_after_shave(self):
        with pytest.raises(ImageTooSmallError):
            ssim(Image(np.zeros((12, 12))), Image(np.zeros((12, 12))), shave=1)

    def test_upper_bound(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            a = Image(rng.random((12, 12)))
            b = Image(rng.random((12, 12)))
            assert ssim(a, b) <= 1.0


class TestMetricReport:
    def test_serialization_never_emits_infinity(self):
        img = Image(np.full((16, 16), 0.25))
        report = compare(img, img)
        doc = report.to_json_dict()
        assert doc["psnr_db"] is None
        assert doc["identical"] is True
        assert doc["ssim"] == 1.0
        json.dumps(doc)  # must be valid JSON (inf would raise)

    def test_regular_report(self):
        a = Image(np.zeros((16, 16)))
        b = Image(np.full((16, 16), 0.5))
        report = compare(a, b, shave=2)
        assert report.shave == 2
        assert not report.identical
        assert report.to_json_dict()["psnr_db"] == pytest.approx(report.psnr)
