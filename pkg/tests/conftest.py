"""Shared fixtures: a deterministic synthetic corpus of natural-looking
single-channel images (smooth base, oriented texture, soft-edged shapes,
fine grain) sized so every pipeline scale divides exactly."""

import numpy as np
import pytest

from refesr.image import Image
from refesr.resample import gaussian_blur, upsample_bicubic

CORPUS_SEED = 20240809
CORPUS_SIZE = 72  # multiple of 12, so scales 2/3/4 divide exactly


def synthetic_image(rng: np.random.Generator, size: int = CORPUS_SIZE) -> Image:
    """One fixture image, kept inside [0.05, 0.95] so additive-noise tests
    rarely clip. Difficulty is tuned so bicubic x3 lands near 30 dB."""
    coarse = rng.random((-(-size // 8), -(-size // 8)))
    smooth = upsample_bicubic(Image(coarse), 8).plane()[:size, :size]
    smooth = (smooth - smooth.min()) / max(smooth.max() - smooth.min(), 1e-9)
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    field = 0.15 + 0.55 * smooth
    for _ in range(2):
        fx, fy = rng.uniform(3.0, 11.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        field += 0.07 * np.sin(2 * np.pi * (fx * xx + fy * yy) / size + phase)
    for _ in range(3):
        cy, cx = rng.uniform(10, size - 10, size=2)
        radius = rng.uniform(4, 12)
        dist = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
        field += rng.uniform(-0.3, 0.3) / (1 + np.exp((dist - radius) / 0.8))
    grain = gaussian_blur(rng.normal(0, 1, (size, size)), 0.8)
    field += 0.09 * grain / max(np.abs(grain).max(), 1e-9)
    return Image(np.clip(field, 0.05, 0.95))


def make_corpus(count: int, seed: int = CORPUS_SEED, size: int = CORPUS_SIZE):
    rng = np.random.default_rng(seed)
    return [(f"img{i:02d}", synthetic_image(rng, size)) for i in range(count)]


@pytest.fixture(scope="session")
def corpus():
    """16 fixtures: items 0-5 serve as the reference split, 6-15 as tests."""
    return make_corpus(16)


@pytest.fixture(scope="session")
def ref_split(corpus):
    return corpus[:6]


@pytest.fixture(scope="session")
def test_split(corpus):
    return corpus[6:]
