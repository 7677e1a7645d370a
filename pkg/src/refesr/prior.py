"""Ensemble-weight prior learned from a reference dataset.

Every resolver is run at scales 2-4 over the reference images; per-cell
mean PSNR and SSIM are aggregated into one scalar score per resolver
(sum over scales of mean_psnr * mean_ssim), and scores are converted to
prior weights with a Gaussian kernel around the best score.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    EmptyDatasetError,
    ImageTooSmallError,
    InvalidParameterError,
    RefESRError,
    ResolverFailureError,
)
from .image import Image, rgb_to_luma
from .metrics import psnr, ssim
from .parallel import ordered_map
from .resample import DegradationModel, downsample
from .resolvers import ResolverSet, resolve

SCALES = (2, 3, 4)
PSNR_CAP_DB = 100.0  # stands in for the +inf sentinel when aggregating scores
DEFAULT_RHO = 0.07
RHO_MODES = ("relative", "absolute")
# Exponents are clipped here so prior weights stay strictly positive even
# for extreme bandwidths (exp(-700) is still a normal float64).
_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class ScoreCell:
    mean_psnr: float
    mean_ssim: float


@dataclass(frozen=True)
class ScoreTable:
    """Per-resolver, per-scale mean metrics over the reference dataset."""

    resolver_ids: tuple[str, ...]
    scales: tuple[int, ...]
    cells: Mapping[str, Mapping[int, ScoreCell]]
    image_count: int

    def score(self, resolver_id: str) -> float:
        """Aggregate score: sum over scales of mean_psnr * mean_ssim."""
        per_scale = self.cells[resolver_id]
        total = 0.0
        for s in self.scales:
            cell = per_scale[s]
            total += cell.mean_psnr * cell.mean_ssim
        return total

    def scores(self) -> np.ndarray:
        return np.array([self.score(rid) for rid in self.resolver_ids])


@dataclass(frozen=True)
class ReferenceWeights:
    """Prior weight vector with its bandwidth and id order."""

    resolver_ids: tuple[str, ...]
    weights: np.ndarray
    rho: float  # effective absolute bandwidth actually applied
    score_max: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "resolver_ids", tuple(self.resolver_ids))

    def aligned_to(self, ids: Sequence[str]) -> np.ndarray:
        """Weights reordered to another id order; errors if the sets differ."""
        if tuple(ids) == self.resolver_ids:
            return self.weights
        index = {rid: i for i, rid in enumerate(self.resolver_ids)}
        missing = [rid for rid in ids if rid not in index]
        if missing or len(ids) != len(self.resolver_ids):
            raise ConfigError(
                f"prior weights cover {list(self.resolver_ids)}, requested {list(ids)}"
            )
        return self.weights[[index[rid] for rid in ids]]


def _capped_psnr(value: float) -> float:
    return min(value, PSNR_CAP_DB)


def build_score_table(
    ref_images: Sequence[tuple[str, Image]],
    resolvers: ResolverSet,
    scales: Sequence[int] = SCALES,
    models: Mapping[int, DegradationModel] | None = None,
) -> ScoreTable:
    """Score every resolver at every scale over the reference dataset.

    Each reference image is converted to luma, cropped to a multiple of
    the least common multiple of the scales, degraded per scale, resolved,
    and scored against the ground truth with shave = scale. Per-image PSNR
    is capped at 100 dB so identical reconstructions keep scores finite.
    Metric means are means of per-image metrics.
    """
    if not ref_images:
        raise EmptyDatasetError("reference dataset is empty")
    scales = tuple(scales)
    if models is None:
        models = {s: DegradationModel(s) for s in scales}
    crop = math.lcm(*scales)

    prepared = []
    for stem, img in ref_images:
        luma = rgb_to_luma(img) if img.channels == 3 else img
        ch = (luma.height // crop) * crop
        cw = (luma.width // crop) * crop
        if ch < crop or cw < crop:
            raise ImageTooSmallError(
                f"reference image {stem!r} is {luma.width}x{luma.height}; need at least {crop}x{crop}"
            )
        prepared.append((stem, Image(luma.data[:ch, :cw])))

    lr_by_scale = {
        s: [(stem, downsample(hr, models[s])) for stem, hr in prepared] for s in scales
    }

    jobs = [
        (spec, s, stem, lr, hr)
        for spec in resolvers
        for s in scales
        for (stem, lr), (_, hr) in zip(lr_by_scale[s], prepared)
    ]

    def run(job):
        spec, s, stem, lr, hr = job
        try:
            out = resolve(spec, lr, s, stem=stem)
        except RefESRError as exc:
            raise ResolverFailureError(
                f"resolver {spec.id!r} failed on image {stem!r} at scale {s}: {exc}"
            ) from exc
        return _capped_psnr(psnr(out, hr, shave=s)), ssim(out, hr, shave=s)

    results = ordered_map(run, jobs)

    cells: dict[str, dict[int, ScoreCell]] = {}
    n_img = len(prepared)
    pos = 0
    for spec in resolvers:
        per_scale = {}
        for s in scales:
            chunk = results[pos : pos + n_img]
            pos += n_img
            per_scale[s] = ScoreCell(
                mean_psnr=sum(p for p, _ in chunk) / n_img,
                mean_ssim=sum(m for _, m in chunk) / n_img,
            )
        cells[spec.id] = per_scale
    return ScoreTable(resolvers.ids, scales, cells, n_img)


def reference_weights(
    table: ScoreTable, rho: float = DEFAULT_RHO, rho_mode: str = "relative"
) -> ReferenceWeights:
    """Gaussian-kernel prior weights around the best aggregate score.

    w_i = exp(-(score_i - score_max)^2 / rho_eff^2), normalized to sum 1.

    ``rho_mode`` "relative" (the default) interprets ``rho`` as a fraction
    of the score range (equivalently: scores affinely normalized to [0, 1]
    before applying the bandwidth), which makes the default 0.07 transfer
    across score scales. "absolute" applies ``rho`` to raw scores.
    """
    if rho <= 0:
        raise InvalidParameterError(f"bandwidth rho must be > 0, got {rho}")
    if rho_mode not in RHO_MODES:
        raise InvalidParameterError(f"rho_mode must be one of {RHO_MODES}, got {rho_mode!r}")
    scores = table.scores()
    score_max = float(scores.max())
    score_range = score_max - float(scores.min())
    if rho_mode == "relative":
        rho_eff = rho * score_range
    else:
        rho_eff = rho
    n = scores.size
    if score_range == 0.0 or rho_eff == 0.0:
        weights = np.full(n, 1.0 / n)
        rho_eff = rho_eff if rho_eff > 0 else rho
    else:
        exponent = np.minimum(((scores - score_max) / rho_eff) ** 2, _MAX_EXPONENT)
        kernel = np.exp(-exponent)
        weights = kernel / kernel.sum()
    return ReferenceWeights(table.resolver_ids, weights, float(rho_eff), score_max)


def weight_entropy(weights: np.ndarray) -> float:
    """Shannon entropy (nats) of a weight vector; 0 for one-hot, ln N uniform."""
    w = np.asarray(weights, dtype=np.float64)
    w = np.clip(w, 1e-300, None)
    return float(-(w * np.log(w)).sum())


def table_to_dict(table: ScoreTable) -> dict:
    return {
        "resolver_ids": list(table.resolver_ids),
        "scales": list(table.scales),
        "image_count": table.image_count,
        "cells": {
            rid: {
                str(s): {
                    "mean_psnr": table.cells[rid][s].mean_psnr,
                    "mean_ssim": table.cells[rid][s].mean_ssim,
                }
                for s in table.scales
            }
            for rid in table.resolver_ids
        },
        "scores": {rid: table.score(rid) for rid in table.resolver_ids},
    }


def table_from_dict(doc: dict) -> ScoreTable:
    ids = tuple(doc["resolver_ids"])
    scales = tuple(int(s) for s in doc["scales"])
    cells = {
        rid: {
            s: ScoreCell(doc["cells"][rid][str(s)]["mean_psnr"], doc["cells"][rid][str(s)]["mean_ssim"])
            for s in scales
        }
        for rid in ids
    }
    table = ScoreTable(ids, scales, cells, int(doc["image_count"]))
    stored = doc.get("scores", {})
    for rid in ids:
        if rid in stored and abs(stored[rid] - table.score(rid)) > 1e-9:
            raise ConfigError(
                f"score table is inconsistent: stored score for {rid!r} is {stored[rid]}, "
                f"recomputed {table.score(rid)}"
            )
    return table


def write_prior(
    path: str | Path,
    table: ScoreTable,
    weights: ReferenceWeights,
    rho: float,
    rho_mode: str,
    config: dict | None = None,
) -> None:
    """Write the prior file: score table + reference weights + provenance."""
    doc = {
        "tool": {"name": "refesr", "version": __version__},
        "config": config or {},
        "rho": rho,
        "rho_mode": rho_mode,
        "score_table": table_to_dict(table),
        "reference_weights": {
            "resolver_ids": list(weights.resolver_ids),
            "weights": [float(w) for w in weights.weights],
            "rho_effective": weights.rho,
            "score_max": weights.score_max,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_prior(path: str | Path) -> tuple[ScoreTable, ReferenceWeights, dict]:
    """Read a prior file back; returns (table, weights, full document)."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read prior file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"prior file {path} is not valid JSON: {exc}") from exc
    table = table_from_dict(doc["score_table"])
    wdoc = doc["reference_weights"]
    weights = ReferenceWeights(
        tuple(wdoc["resolver_ids"]),
        np.array(wdoc["weights"], dtype=np.float64),
        float(wdoc["rho_effective"]),
        float(wdoc["score_max"]),
    )
    return table, weights, doc
