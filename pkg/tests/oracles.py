"""Independent reference implementations used as test oracles.

Everything here is written the straightforward way (scalar loops, explicit
formulas, stock linear-algebra calls) and deliberately shares no code with
the optimized paths it checks.
"""

import math

import numpy as np


def _cubic(t: float) -> float:
    """Cubic convolution kernel, a = -0.5, evaluated at one scalar."""
    at = abs(t)
    if at <= 1.0:
        return 1.5 * at**3 - 2.5 * at**2 + 1.0
    if at < 2.0:
        return -0.5 * at**3 + 2.5 * at**2 - 4.0 * at + 2.0
    return 0.0


def dense_axis_matrix(out_len: int, in_len: int, step: float, widen: float) -> np.ndarray:
    """Dense one-axis resampling matrix under the project's convention:

    output u samples input coordinate (u + 0.5) * step - 0.5, cubic kernel
    widened by ``widen``, indices clamped (replicate border), weights
    normalized to sum 1 per row.
    """
    mat = np.zeros((out_len, in_len))
    radius = 2.0 * widen
    for u in range(out_len):
        center = (u + 0.5) * step - 0.5
        lo = math.floor(center - radius) - 1
        hi = math.ceil(center + radius) + 1
        weights = {}
        total = 0.0
        for i in range(lo, hi + 1):
            w = _cubic((center - i) / widen) / widen
            if w != 0.0:
                weights[i] = w
                total += w
        for i, w in weights.items():
            mat[u, min(max(i, 0), in_len - 1)] += w / total
    return mat


def dense_degradation_matrix(height: int, width: int, scale: int, antialias: bool = True) -> np.ndarray:
    """Explicit dense degradation operator on flattened row-major images."""
    widen = float(scale) if antialias else 1.0
    av = dense_axis_matrix(height // scale, height, float(scale), widen)
    ah = dense_axis_matrix(width // scale, width, float(scale), widen)
    out_h, out_w = height // scale, width // scale
    mat = np.zeros((out_h * out_w, height * width))
    for r in range(out_h):
        for c in range(out_w):
            mat[r * out_w + c] = np.outer(av[r], ah[c]).ravel()
    return mat


def dense_upsample_matrix(out_len: int, in_len: int, scale: int) -> np.ndarray:
    """Dense one-axis bicubic upsampling matrix (no antialias widening)."""
    return dense_axis_matrix(out_len, in_len, 1.0 / scale, 1.0)


def reference_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Plain dense SSIM: 11x11 Gaussian window (sigma 1.5), valid mode,
    C1 = 0.01^2 and C2 = 0.03^2 on [0, 1] data, population statistics."""
    size, sigma = 11, 1.5
    g1 = np.array([math.exp(-((i - 5) ** 2) / (2 * sigma**2)) for i in range(size)])
    window = np.outer(g1, g1)
    window /= window.sum()
    c1, c2 = 0.01**2, 0.03**2
    rows = a.shape[0] - size + 1
    cols = a.shape[1] - size + 1
    values = []
    for r in range(rows):
        for c in range(cols):
            pa = a[r : r + size, c : c + size]
            pb = b[r : r + size, c : c + size]
            mu_a = float((window * pa).sum())
            mu_b = float((window * pb).sum())
            var_a = float((window * pa * pa).sum()) - mu_a**2
            var_b = float((window * pb * pb).sum()) - mu_b**2
            cov = float((window * pa * pb).sum()) - mu_a * mu_b
            num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
            den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
            values.append(num / den)
    return float(np.mean(values))


def kkt_weights(x_aug: np.ndarray, y_aug: np.ndarray) -> np.ndarray:
    """Equality-constrained least squares via the KKT system:

        [ Y'^T Y'   1 ] [w ]   [ Y'^T x' ]
        [ 1^T       0 ] [mu] = [ 1       ]
    """
    n = y_aug.shape[1]
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = y_aug.T @ y_aug
    kkt[:n, n] = 1.0
    kkt[n, :n] = 1.0
    rhs = np.concatenate([y_aug.T @ x_aug, [1.0]])
    return np.linalg.solve(kkt, rhs)[:n]
