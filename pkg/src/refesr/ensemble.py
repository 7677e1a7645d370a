"""Ensemble core: assemble the constrained least-squares system for one LR
image and solve the combination weights analytically.

Given resolver outputs f_1..f_N, the degradation operator H, the prior
weight vector w_ref and a balance parameter lambda, the weights minimize

    || x - Y w ||^2 + lambda * || w - w_ref ||^2   subject to  sum(w) = 1,

where column i of Y is H(f_i) flattened. The augmented system stacks
sqrt(lambda) * w_ref under x and sqrt(lambda) * I under Y, turning the
problem into an equality-constrained least squares whose solution is
w = G^-1 1 / (1^T G^-1 1) with the Gram matrix
G = (x' 1^T - Y')^T (x' 1^T - Y').

Nonnegativity is deliberately NOT enforced: only the sum-to-one constraint
is, so weights may be negative and are surfaced in diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError
from .image import Image
from .parallel import ordered_map
from .prior import ReferenceWeights
from .resample import DegradationModel, apply_degradation
from .resolvers import ResolverSet, geometric_self_ensemble, resolve

RCOND_FLOOR = 1e-12
REGULARIZATION_FACTOR = 1e-10


@dataclass(frozen=True)
class EnsembleProblem:
    """Flattened least-squares data for one LR image.

    ``lam`` absorbs the noise and prior scales into one balance scalar.
    """

    x: np.ndarray  # (M,) LR observation
    Y: np.ndarray  # (M, N), column i = H(f_i) flattened
    w_ref: np.ndarray  # (N,)
    lam: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).ravel()
        Y = np.asarray(self.Y, dtype=np.float64)
        w_ref = np.asarray(self.w_ref, dtype=np.float64).ravel()
        if Y.ndim != 2 or Y.shape[0] != x.size:
            raise DimensionMismatchError(
                f"Y must be (M, N) with M = {x.size}, got {Y.shape}"
            )
        if w_ref.size != Y.shape[1]:
            raise DimensionMismatchError(
                f"w_ref has {w_ref.size} entries for {Y.shape[1]} columns"
            )
        if self.lam < 0:
            raise InvalidParameterError(f"lambda must be >= 0, got {self.lam}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "w_ref", w_ref)

    @property
    def n_resolvers(self) -> int:
        return self.Y.shape[1]

    def augmented(self) -> tuple[np.ndarray, np.ndarray]:
        """x' = [x; sqrt(lam) w_ref], Y' = [Y; sqrt(lam) I]."""
        root = np.sqrt(self.lam)
        n = self.n_resolvers
        x_aug = np.concatenate([self.x, root * self.w_ref])
        y_aug = np.vstack([self.Y, root * np.eye(n)])
        return x_aug, y_aug


@dataclass(frozen=True)
class EnsembleSolution:
    """Solved weights plus solve diagnostics and (optionally) the HR image."""

    weights: np.ndarray
    residual_recon: float  # ||x - Y w*||_2
    residual_prior: float  # ||w* - w_ref||_2
    gram_condition_estimate: float
    regularization_added: float  # epsilon actually added to the Gram diagonal
    used_fallback: bool  # True when the solver fell back to w_ref
    hr: Image | None = None

    def to_json_dict(self, resolver_ids: Sequence[str] | None = None) -> dict:
        weights = [float(w) for w in self.weights]
        doc = {
            "weights": dict(zip(resolver_ids, weights)) if resolver_ids else weights,
            "residual_recon": self.residual_recon,
            "residual_prior": self.residual_prior,
            "gram_condition_estimate": self.gram_condition_estimate,
            "regularization_added": self.regularization_added,
            "used_fallback": self.used_fallback,
        }
        return doc


def _as_weight_vector(w_ref, n: int) -> np.ndarray:
    if isinstance(w_ref, ReferenceWeights):
        w = np.asarray(w_ref.weights, dtype=np.float64)
    else:
        w = np.asarray(w_ref, dtype=np.float64).ravel()
    if w.size != n:
        raise DimensionMismatchError(f"w_ref has {w.size} entries for {n} resolver outputs")
    return w


def assemble(
    lr: Image,
    outputs: Sequence[Image],
    model: DegradationModel,
    w_ref,
    lam: float,
) -> EnsembleProblem:
    """Build the least-squares system from resolver outputs.

    Columns of Y are the degradation operator applied to each output with
    exactly the operator that generated the LR observation.
    """
    if not outputs:
        raise InvalidParameterError("need at least one resolver output")
    s = model.scale
    want = (lr.height * s, lr.width * s, lr.channels)
    for i, out in enumerate(outputs):
        got = (out.height, out.width, out.channels)
        if got != want:
            raise DimensionMismatchError(
                f"output {i} has shape {got}, expected {want} for scale {s}"
            )
    w = _as_weight_vector(w_ref, len(outputs))
    x = lr.data.ravel()
    columns = [apply_degradation(out, model).data.ravel() for out in outputs]
    return EnsembleProblem(x=x, Y=np.column_stack(columns), w_ref=w, lam=float(lam))


def solve_weights(problem: EnsembleProblem) -> EnsembleSolution:
    """Analytical weight solution via the Gram matrix of the augmented system.

    If the reciprocal condition estimate of G falls below 1e-12 a ridge
    epsilon = 1e-10 * trace(G)/N is added (and reported). If the system is
    singular even then (all-identical columns at lambda = 0), the solver
    falls back to w_ref with ``used_fallback`` set instead of crashing.
    """
    n = problem.n_resolvers
    if n == 1:
        weights = np.array([1.0])
        return _finish(problem, weights, cond=1.0, eps=0.0, fallback=False)

    x_aug, y_aug = problem.augmented()
    diff = x_aug[:, None] - y_aug
    gram = diff.T @ diff
    singular_values = np.linalg.svd(gram, compute_uv=False)
    s_max = float(singular_values[0])
    s_min = float(singular_values[-1])
    cond = np.inf if s_min == 0.0 else s_max / s_min
    rcond = 0.0 if s_max == 0.0 else s_min / s_max

    eps = 0.0
    if rcond < RCOND_FLOOR:
        eps = REGULARIZATION_FACTOR * float(np.trace(gram)) / n
        gram = gram + eps * np.eye(n)

    weights = None
    if eps > 0.0 or rcond >= RCOND_FLOOR:
        try:
            candidate = np.linalg.solve(gram, np.ones(n))
            total = candidate.sum()
            if np.all(np.isfinite(candidate)) and total != 0.0:
                weights = candidate / total
        except np.linalg.LinAlgError:
            weights = None
    if weights is None:
        return _finish(problem, problem.w_ref.copy(), cond=cond, eps=eps, fallback=True)
    return _finish(problem, weights, cond=cond, eps=eps, fallback=False)


def _finish(problem, weights, cond, eps, fallback) -> EnsembleSolution:
    recon = float(np.linalg.norm(problem.x - problem.Y @ weights))
    prior = float(np.linalg.norm(weights - problem.w_ref))
    return EnsembleSolution(
        weights=weights,
        residual_recon=recon,
        residual_prior=prior,
        gram_condition_estimate=float(cond),
        regularization_added=eps,
        used_fallback=fallback,
    )


def combine(outputs: Sequence[Image], weights) -> Image:
    """Pixel-wise weighted sum of resolver outputs, clamped to [0, 1].

    Weights must sum to 1 within 1e-8 but may contain negative entries;
    intermediate values may leave [0, 1] before the final clamp.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    if len(outputs) != w.size:
        raise DimensionMismatchError(f"{len(outputs)} outputs for {w.size} weights")
    if abs(w.sum() - 1.0) > 1e-8:
        raise InvalidParameterError(f"weights sum to {w.sum()!r}, expected 1 within 1e-8")
    shape = outputs[0].data.shape
    for i, out in enumerate(outputs):
        if out.data.shape != shape:
            raise DimensionMismatchError(
                f"output {i} has shape {out.data.shape}, expected {shape}"
            )
    acc = np.zeros(shape, dtype=np.float64)
    for wi, out in zip(w, outputs):
        acc += wi * out.data
    return Image(np.clip(acc, 0.0, 1.0))


def super_resolve(
    lr: Image,
    resolvers: ResolverSet,
    model: DegradationModel,
    w_ref,
    lam: float = 0.8,
    stem: str | None = None,
    self_ensemble: bool = False,
) -> EnsembleSolution:
    """Full pipeline for one LR image: resolve, assemble, solve, combine.

    With ``self_ensemble`` each resolver is averaged over the 8 dihedral
    transforms of the input before ensembling (the geometric-ensemble
    combination).
    """
    if isinstance(w_ref, ReferenceWeights):
        w = w_ref.aligned_to(resolvers.ids)
    else:
        w = _as_weight_vector(w_ref, len(resolvers))
    runner = geometric_self_ensemble if self_ensemble else resolve
    outputs = ordered_map(
        lambda spec: runner(spec, lr, model.scale, stem=stem), list(resolvers)
    )
    problem = assemble(lr, outputs, model, w, lam)
    solution = solve_weights(problem)
    hr = combine(outputs, solution.weights)
    return replace(solution, hr=hr)
