"""t-SNE for inspecting pattern and feature clusters in 2-D.

Gaussian neighbor affinities are calibrated per point by a log-space
bisection of sigma to the requested perplexity, symmetrized as
p_ij = (p_{j|i} + p_{i|j}) / (2N), and matched by Student-t affinities in
the plane through gradient descent on the KL divergence with momentum and
early exaggeration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DISTANCE_FLOOR = 1e-12
KL_FLOOR = 1e-12
SIGMA_BRACKET = (1e-20, 1e20)
CALIBRATION_ITERS = 50
PERPLEXITY_TOL = 1e-4


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    momentum_switch: int = 250
    exaggeration: float = 12.0
    exaggeration_until: int = 250
    seed: int = 0

    def __post_init__(self) -> None:
        if self.perplexity <= 1.0:
            raise ValueError("perplexity must exceed 1")


@dataclass(frozen=True)
class Embedding:
    points: np.ndarray
    final_kl: float
    initial_kl: float


def _pairwise_sq_distances(data: np.ndarray) -> np.ndarray:
    sq = np.sum(data * data, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (data @ data.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _row_conditional(d2_row: np.ndarray, i: int, sigma: float
                     ) -> tuple[np.ndarray, float]:
    """Conditional p_{.|i} for one sigma, plus the perplexity 2^H."""
    logits = -d2_row / (2.0 * sigma * sigma)
    logits[i] = -np.inf
    logits -= logits.max()
    w = np.exp(logits)
    w[i] = 0.0
    total = w.sum()
    p = w / total
    nz = p > 0
    entropy_bits = float(-(p[nz] * np.log2(p[nz])).sum())
    return p, 2.0 ** entropy_bits


def calibrate_affinities(data: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized affinity matrix P with every row of the conditional
    matrix calibrated to the requested perplexity.

    Sigma is bisected in log space over [1e-20, 1e20] for 50 iterations
    (2^H is monotone in sigma); duplicate points are separated by a
    distance floor of 1e-12.
    """
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    if n < 5:
        raise ValueError("need at least 5 points")
    if not (perplexity < (n - 1) / 3):
        raise ValueError(f"perplexity {perplexity} too large for {n} points")
    d2 = _pairwise_sq_distances(data)
    off = ~np.eye(n, dtype=bool)
    d2[off] = np.maximum(d2[off], DISTANCE_FLOOR)
    if not np.isfinite(d2).all():
        raise ValueError("pairwise distances are not finite")

    cond = np.zeros((n, n))
    log_lo_0, log_hi_0 = np.log(SIGMA_BRACKET[0]), np.log(SIGMA_BRACKET[1])
    for i in range(n):
        lo, hi = log_lo_0, log_hi_0
        p_row = None
        for _ in range(CALIBRATION_ITERS):
            mid = (lo + hi) / 2
            p_row, perp = _row_conditional(d2[i], i, np.exp(mid))
            if abs(perp - perplexity) <= PERPLEXITY_TOL:
                break
            if perp > perplexity:
                hi = mid
            else:
                lo = mid
        cond[i] = p_row
    return (cond + cond.T) / (2.0 * n)


def _student_weights(points: np.ndarray) -> np.ndarray:
    w = 1.0 / (1.0 + _pairwise_sq_distances(points))
    np.fill_diagonal(w, 0.0)
    return w


def kl_divergence(p: np.ndarray, points: np.ndarray) -> float:
    """KL(P || Q(points)) with p, q floored at 1e-12 inside the log."""
    w = _student_weights(points)
    q = w / w.sum()
    mask = p > 0
    pm = np.maximum(p[mask], KL_FLOOR)
    qm = np.maximum(q[mask], KL_FLOOR)
    return float((p[mask] * (np.log(pm) - np.log(qm))).sum())


def embed(data: np.ndarray, config: TsneConfig = TsneConfig(),
          init: np.ndarray | None = None) -> Embedding:
    """Gradient-descent embedding into the plane.

    grad_i = 4 sum_j (p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2),
    with momentum 0.5 switching to 0.8 after iteration 250 and the P
    matrix exaggerated 12x for the first 250 iterations.  Passing `init`
    overrides the seeded N(0, 1e-4 I) start (used for equivariance tests).
    """
    data = np.asarray(data, dtype=float)
    p = calibrate_affinities(data, config.perplexity)
    n = p.shape[0]
    if init is not None:
        y = np.array(init, dtype=float)
        if y.shape != (n, 2):
            raise ValueError(f"init must be ({n}, 2), got {y.shape}")
    else:
        rng = np.random.default_rng(config.seed)
        y = rng.standard_normal((n, 2)) * np.sqrt(1e-4)

    initial_kl = kl_divergence(p, y)
    velocity = np.zeros_like(y)
    for it in range(1, config.iterations + 1):
        target = p * config.exaggeration if it <= config.exaggeration_until else p
        w = _student_weights(y)
        q = w / w.sum()
        m = (target - q) * w
        grad = 4.0 * (m.sum(axis=1)[:, None] * y - m @ y)
        momentum = (config.momentum_early if it <= config.momentum_switch
                    else config.momentum_late)
        velocity = momentum * velocity - config.learning_rate * grad
        y = y + velocity
        if not np.isfinite(y).all():
            raise FloatingPointError(f"embedding diverged at iteration {it}")

    final_kl = kl_divergence(p, y)
    if not np.isfinite(final_kl):
        raise FloatingPointError("final KL divergence is not finite")
    return Embedding(points=y, final_kl=final_kl, initial_kl=initial_kl)
