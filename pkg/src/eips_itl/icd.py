"""Greedy pivoted incomplete Cholesky factorization of Gaussian Gram matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class IcdFactor:
    """Low-rank factor with ``K ~= G @ G.T``.

    ``G`` is stored in the original row order; ``G[pivots]`` is lower
    trapezoidal.  ``residual_trace`` is the trace of ``K - G G^T``.
    """

    G: np.ndarray
    pivots: np.ndarray
    residual_trace: float
    epsilon: float
    truncated: bool = False

    @property
    def rank(self) -> int:
        return self.G.shape[1]


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def icd_factor(X, sigma: float, epsilon: float = 1e-6, max_rank: int | None = None,
               stop: str = "trace") -> IcdFactor:
    """Factor the Gaussian Gram matrix of ``X`` without forming it.

    Each step pivots on the largest remaining residual diagonal (ties go to
    the lowest index) and computes one column of ``G`` from ``N`` kernel
    evaluations.  Iteration stops once the residual trace (``stop="trace"``)
    or the largest residual diagonal entry (``stop="max-diagonal"``) drops
    below ``epsilon``, or when ``max_rank`` columns exist.  Hitting
    ``max_rank`` first sets ``truncated``.
    """
    X = _as_points(X)
    N = X.shape[0]
    if N < 1:
        raise ConfigError("icd_factor needs at least one point")
    if not (epsilon > 0 and sigma > 0):
        raise ConfigError("sigma and epsilon must be positive")
    if stop not in ("trace", "max-diagonal"):
        raise ConfigError(f"unknown stopping rule {stop!r}")
    max_rank = N if max_rank is None else min(int(max_rank), N)
    if max_rank < 1:
        raise ConfigError("max_rank must be >= 1")

    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    diag = np.ones(N)  # k(x, x) = 1
    G = np.zeros((N, max_rank))
    pivots = []

    def residual():
        return diag.sum() if stop == "trace" else diag.max()

    while residual() >= epsilon and len(pivots) < max_rank:
        j = int(np.argmax(diag))
        k = len(pivots)
        kcol = np.exp(-np.sum((X - X[j]) ** 2, axis=1) * inv2s2)
        col = (kcol - G[:, :k] @ G[j, :k]) / np.sqrt(diag[j])
        # pivot rows are already reproduced exactly
        col[pivots] = 0.0
        col[j] = np.sqrt(diag[j])
        G[:, k] = col
        diag = np.maximum(diag - col * col, 0.0)
        diag[j] = 0.0
        pivots.append(j)

    truncated = bool(residual() >= epsilon)
    return IcdFactor(G[:, : len(pivots)].copy(), np.asarray(pivots, dtype=int), float(diag.sum()),
                     float(epsilon), truncated)
