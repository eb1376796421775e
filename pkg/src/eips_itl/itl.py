"""Information theoretic learning descriptors with interchangeable backends.

Every descriptor uses the unnormalized Gaussian ``k(u) = exp(-||u||^2 / 2 w^2)``
(so ``k(0) = 1``); the Parzen constant ``1 / (sqrt(2 pi) w)^d`` is dropped.
It only rescales IP/CIP and cancels in the Cauchy-Schwarz quantities and the
correntropy coefficient.

Default widths: information potential, cross information potential and the
divergences use ``sqrt(2) * sigma`` (overlap of two Parzen estimates of
width ``sigma``); correntropy, the correntropy coefficient and the QMI terms
use ``sigma``.  Every function accepts ``width=`` to override this.

Backends
--------
``Direct(sigma)``
    Pairwise kernel sums, evaluated in row blocks. The reference oracle.
``Eips(sigma, kind="taylor", degree=9)``
    Explicit feature maps; descriptors reduce to products of mean feature
    vectors and the joint outer-product matrix held in :class:`EipsStats`.
``Icd(sigma, epsilon=1e-6)``
    Incomplete Cholesky factors of the Gram matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .errors import ConfigError, DataError, DegenerateError
from .features import FeatureMap, build_map
from .icd import icd_factor

SQRT2 = math.sqrt(2.0)
DEGENERATE_TOL = 1e-12
CS_FLOOR = 1e-300
_BLOCK = 512


# ---------------------------------------------------------------------------
# backends


@dataclass(frozen=True)
class Direct:
    sigma: float


@dataclass
class Eips:
    sigma: float
    kind: str = "taylor"
    degree: int | None = 9
    n_features: int | None = None
    seed: int = 0
    maps: dict = field(default_factory=dict, repr=False, compare=False)

    def feature_map(self, d: int, width: float) -> FeatureMap:
        """Feature map for ``d``-dimensional inputs at kernel width ``width`` (cached)."""
        key = (int(d), float(width))
        fm = self.maps.get(key)
        if fm is None:
            fm = build_map(self.kind, d, width, degree=self.degree, n_features=self.n_features, seed=self.seed)
            self.maps[key] = fm
        return fm


@dataclass
class Icd:
    sigma: float
    epsilon: float = 1e-6
    stop: str = "trace"
    rank_log: list = field(default_factory=list, repr=False, compare=False)

    def factor(self, X, width):
        f = icd_factor(X, width, self.epsilon, stop=self.stop)
        self.rank_log.append(f.rank)
        return f


ItlBackend = Union[Direct, Eips, Icd]


# ---------------------------------------------------------------------------
# sufficient statistics


@dataclass(frozen=True, eq=False)
class EipsStats:
    """Mean features and joint outer products of a (paired) sample.

    ``Zxy`` is the sum ``sum_i z(x_i) z(y_i)^T`` and ``diag_sum`` the sum
    ``sum_i z(x_i)^T z(y_i)``; both are ``None`` without a second variable.
    """

    n: int
    zbar_x: np.ndarray
    zbar_y: np.ndarray | None = None
    Zxy: np.ndarray | None = None
    diag_sum: float | None = None

    @property
    def paired(self) -> bool:
        return self.zbar_y is not None


def stats_build(fm_x: FeatureMap, X, fm_y: FeatureMap | None = None, Y=None) -> EipsStats:
    ZX = fm_x.map_batch(_points(X))
    if ZX.shape[0] == 0:
        raise DataError("cannot build statistics from an empty sample")
    if Y is None:
        return EipsStats(ZX.shape[0], ZX.mean(axis=0))
    fm_y = fm_x if fm_y is None else fm_y
    ZY = fm_y.map_batch(_points(Y))
    if ZY.shape[0] != ZX.shape[0]:
        raise DataError(f"paired samples differ in length: {ZX.shape[0]} vs {ZY.shape[0]}")
    diag_sum = float(np.einsum("ij,ij->", ZX, ZY)) if ZX.shape[1] == ZY.shape[1] else None
    return EipsStats(ZX.shape[0], ZX.mean(axis=0), ZY.mean(axis=0), ZX.T @ ZY, diag_sum)


def stats_update(s: EipsStats, z_x, z_y=None) -> EipsStats:
    """Fold one more mapped sample into ``s`` (returns a new object)."""
    z_x = np.asarray(z_x, dtype=float)
    if z_x.shape != s.zbar_x.shape:
        raise ConfigError(f"feature dimension mismatch: {z_x.shape} vs {s.zbar_x.shape}")
    n1 = s.n + 1
    zbar_x = (s.n * s.zbar_x + z_x) / n1
    if not s.paired:
        if z_y is not None:
            raise ConfigError("unpaired statistics cannot absorb a paired sample")
        return replace(s, n=n1, zbar_x=zbar_x)
    if z_y is None:
        raise ConfigError("paired statistics need z_y")
    z_y = np.asarray(z_y, dtype=float)
    if z_y.shape != s.zbar_y.shape:
        raise ConfigError(f"feature dimension mismatch: {z_y.shape} vs {s.zbar_y.shape}")
    diag_sum = None if s.diag_sum is None else s.diag_sum + float(z_x @ z_y)
    return EipsStats(n1, zbar_x, (s.n * s.zbar_y + z_y) / n1, s.Zxy + np.outer(z_x, z_y), diag_sum)


def empty_like_stats(s: EipsStats) -> EipsStats:
    """Zero-count statistics with the same shapes, as a seed for ``stats_update``."""
    return EipsStats(
        0,
        np.zeros_like(s.zbar_x),
        None if s.zbar_y is None else np.zeros_like(s.zbar_y),
        None if s.Zxy is None else np.zeros_like(s.Zxy),
        None if s.diag_sum is None else 0.0,
    )


# descriptors evaluated from statistics alone (no per-sample data)


def ip_from_stats(s: EipsStats) -> float:
    return float(s.zbar_x @ s.zbar_x)


def cip_from_stats(sx: EipsStats, sy: EipsStats | None = None) -> float:
    other = sx.zbar_y if sy is None else sy.zbar_x
    return float(sx.zbar_x @ other)


def correntropy_from_stats(s: EipsStats) -> float:
    if s.diag_sum is None:
        raise ConfigError("correntropy needs both variables in a shared feature space")
    return s.diag_sum / s.n


def cc_from_stats(s: EipsStats) -> float:
    ipx = float(s.zbar_x @ s.zbar_x)
    ipy = float(s.zbar_y @ s.zbar_y)
    return _cc(correntropy_from_stats(s), float(s.zbar_x @ s.zbar_y), ipx, ipy)


def qmi_terms_from_stats(s: EipsStats) -> tuple[float, float, float]:
    n = s.n
    vj = float(np.sum(s.Zxy * s.Zxy)) / n**2
    vm = float(s.zbar_x @ s.zbar_x) * float(s.zbar_y @ s.zbar_y)
    vc = float(s.zbar_x @ (s.Zxy / n) @ s.zbar_y)
    return vj, vm, vc


# ---------------------------------------------------------------------------
# direct (pairwise) helpers


def _points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DataError(f"expected a sample matrix, got shape {X.shape}")
    return X


def _kernel_block(A: np.ndarray, B: np.ndarray, width: float) -> np.ndarray:
    sq = np.zeros((A.shape[0], B.shape[0]))
    for k in range(A.shape[1]):
        diff = A[:, k, None] - B[None, :, k]
        sq += diff * diff
    return np.exp(-sq / (2.0 * width * width))


def gaussian_gram(X, Y=None, width: float = 1.0) -> np.ndarray:
    """Explicit Gaussian Gram matrix (used by tests and small problems)."""
    X = _points(X)
    return _kernel_block(X, X if Y is None else _points(Y), width)


def _mean_kernel(X: np.ndarray, Y: np.ndarray, width: float) -> float:
    total = 0.0
    for i in range(0, X.shape[0], _BLOCK):
        total += _kernel_block(X[i : i + _BLOCK], Y, width).sum()
    return total / (X.shape[0] * Y.shape[0])


def _paired_kernel_mean(X: np.ndarray, Y: np.ndarray, width: float) -> float:
    sq = np.sum((X - Y) ** 2, axis=1)
    return float(np.mean(np.exp(-sq / (2.0 * width * width))))


def _direct_qmi_terms(X: np.ndarray, Y: np.ndarray, width: float) -> tuple[float, float, float]:
    N = X.shape[0]
    vj = 0.0
    vc = 0.0
    sum_kx = 0.0
    sum_ky = 0.0
    for i in range(0, N, _BLOCK):
        kx = _kernel_block(X[i : i + _BLOCK], X, width)
        ky = _kernel_block(Y[i : i + _BLOCK], Y, width)
        vj += np.sum(kx * ky)
        rx, ry = kx.sum(axis=1), ky.sum(axis=1)
        vc += rx @ ry
        sum_kx += rx.sum()
        sum_ky += ry.sum()
    return vj / N**2, (sum_kx / N**2) * (sum_ky / N**2), vc / N**3


def _cc(corr: float, cip: float, ipx: float, ipy: float) -> float:
    dx, dy = 1.0 - ipx, 1.0 - ipy
    if dx <= DEGENERATE_TOL or dy <= DEGENERATE_TOL:
        raise DegenerateError("correntropy coefficient undefined: a marginal sample has (near) zero spread")
    return (corr - cip) / math.sqrt(dx * dy)


def _check_paired(X: np.ndarray, Y: np.ndarray):
    if X.shape[0] != Y.shape[0]:
        raise DataError(f"paired samples differ in length: {X.shape[0]} vs {Y.shape[0]}")
    if X.shape[0] == 0:
        raise DataError("empty sample")


def _check_same_dim(X: np.ndarray, Y: np.ndarray):
    if X.shape[1] != Y.shape[1]:
        raise DataError(f"samples differ in dimension: {X.shape[1]} vs {Y.shape[1]}")
    if X.shape[0] == 0 or Y.shape[0] == 0:
        raise DataError("empty sample")


def _stacked_block_means(backend: Icd, X: np.ndarray, Y: np.ndarray, width: float):
    """ICD of the stacked sample; returns (G_x, G_y) row blocks."""
    f = backend.factor(np.vstack([X, Y]), width)
    return f.G[: X.shape[0]], f.G[X.shape[0] :]


# ---------------------------------------------------------------------------
# public descriptors


def information_potential(backend: ItlBackend, X, width: float | None = None) -> float:
    """``(1/N^2) sum_ij k(x_i - x_j)``; lies in (0, 1]."""
    X = _points(X)
    if X.shape[0] == 0:
        raise DataError("information potential of an empty sample")
    w = SQRT2 * backend.sigma if width is None else width
    if isinstance(backend, Direct):
        return _mean_kernel(X, X, w)
    if isinstance(backend, Eips):
        return ip_from_stats(stats_build(backend.feature_map(X.shape[1], w), X))
    g = backend.factor(X, w).G.sum(axis=0) / X.shape[0]
    return float(g @ g)


def renyi_quadratic_entropy(backend: ItlBackend, X, width: float | None = None) -> float:
    return -math.log(information_potential(backend, X, width))


def cross_information_potential(backend: ItlBackend, X, Y, width: float | None = None) -> float:
    """``(1/(N_x N_y)) sum_ij k(x_i - y_j)``; sample sizes may differ."""
    X, Y = _points(X), _points(Y)
    _check_same_dim(X, Y)
    w = SQRT2 * backend.sigma if width is None else width
    if isinstance(backend, Direct):
        return _mean_kernel(X, Y, w)
    if isinstance(backend, Eips):
        fm = backend.feature_map(X.shape[1], w)
        return cip_from_stats(stats_build(fm, X), stats_build(fm, Y))
    Gx, Gy = _stacked_block_means(backend, X, Y, w)
    return float(Gx.mean(axis=0) @ Gy.mean(axis=0))


def correntropy(backend: ItlBackend, X, Y, width: float | None = None) -> float:
    """Sample correntropy ``(1/N) sum_i k(x_i - y_i)`` of paired samples."""
    X, Y = _points(X), _points(Y)
    _check_paired(X, Y)
    _check_same_dim(X, Y)
    w = backend.sigma if width is None else width
    if isinstance(backend, Direct):
        return _paired_kernel_mean(X, Y, w)
    if isinstance(backend, Eips):
        fm = backend.feature_map(X.shape[1], w)
        return correntropy_from_stats(stats_build(fm, X, fm, Y))
    Gx, Gy = _stacked_block_means(backend, X, Y, w)
    return float(np.einsum("ij,ij->", Gx, Gy)) / X.shape[0]


def correntropy_coefficient(backend: ItlBackend, X, Y, width: float | None = None) -> float:
    """Centred, normalised correntropy of paired samples.

    ``(V(X,Y) - CIP(X,Y)) / sqrt((1 - IP(X)) (1 - IP(Y)))`` with all four
    terms at the same width.  Raises :class:`DegenerateError` when either
    marginal sample is (numerically) constant.
    """
    X, Y = _points(X), _points(Y)
    _check_paired(X, Y)
    _check_same_dim(X, Y)
    w = backend.sigma if width is None else width
    if isinstance(backend, Direct):
        return _cc(_paired_kernel_mean(X, Y, w), _mean_kernel(X, Y, w), _mean_kernel(X, X, w), _mean_kernel(Y, Y, w))
    if isinstance(backend, Eips):
        fm = backend.feature_map(X.shape[1], w)
        return cc_from_stats(stats_build(fm, X, fm, Y))
    Gx, Gy = _stacked_block_means(backend, X, Y, w)
    gx, gy = Gx.mean(axis=0), Gy.mean(axis=0)
    corr = float(np.einsum("ij,ij->", Gx, Gy)) / X.shape[0]
    return _cc(corr, float(gx @ gy), float(gx @ gx), float(gy @ gy))


def qmi_terms(backend: ItlBackend, X, Y, width: float | None = None) -> tuple[float, float, float]:
    """Joint, marginal-product and cross information potentials ``(V_J, V_M, V_C)``."""
    X, Y = _points(X), _points(Y)
    _check_paired(X, Y)
    w = backend.sigma if width is None else width
    N = X.shape[0]
    if isinstance(backend, Direct):
        return _direct_qmi_terms(X, Y, w)
    if isinstance(backend, Eips):
        s = stats_build(backend.feature_map(X.shape[1], w), X, backend.feature_map(Y.shape[1], w), Y)
        return qmi_terms_from_stats(s)
    Gx = backend.factor(X, w).G
    Gy = backend.factor(Y, w).G
    cross = Gx.T @ Gy
    sx, sy = Gx.sum(axis=0), Gy.sum(axis=0)
    vj = float(np.sum(cross * cross)) / N**2
    vm = float(sx @ sx) * float(sy @ sy) / N**4
    vc = float(sx @ cross @ sy) / N**3
    return vj, vm, vc


def _qmi_cs(vj, vm, vc) -> float:
    if vc < CS_FLOOR:
        raise DegenerateError("Cauchy-Schwarz ratio is numerically degenerate (V_C ~ 0)")
    return math.log(vj * vm / (vc * vc))


def qmi_cs(backend: ItlBackend, X, Y, width: float | None = None) -> float:
    return _qmi_cs(*qmi_terms(backend, X, Y, width))


def qmi_ed(backend: ItlBackend, X, Y, width: float | None = None) -> float:
    vj, vm, vc = qmi_terms(backend, X, Y, width)
    return vj + vm - 2.0 * vc


def _divergence_terms(backend: ItlBackend, X, Y, width):
    X, Y = _points(X), _points(Y)
    _check_same_dim(X, Y)
    w = SQRT2 * backend.sigma if width is None else width
    if isinstance(backend, Icd):
        Gx, Gy = _stacked_block_means(backend, X, Y, w)
        gx, gy = Gx.mean(axis=0), Gy.mean(axis=0)
        return float(gx @ gx), float(gy @ gy), float(gx @ gy)
    if isinstance(backend, Eips):
        fm = backend.feature_map(X.shape[1], w)
        sx, sy = stats_build(fm, X), stats_build(fm, Y)
        return ip_from_stats(sx), ip_from_stats(sy), cip_from_stats(sx, sy)
    return _mean_kernel(X, X, w), _mean_kernel(Y, Y, w), _mean_kernel(X, Y, w)


def divergence_cs(backend: ItlBackend, X, Y, width: float | None = None) -> float:
    ipx, ipy, cip = _divergence_terms(backend, X, Y, width)
    if cip < CS_FLOOR:
        raise DegenerateError("Cauchy-Schwarz divergence is numerically degenerate (CIP ~ 0)")
    return math.log(ipx * ipy / (cip * cip))


def divergence_ed(backend: ItlBackend, X, Y, width: float | None = None) -> float:
    ipx, ipy, cip = _divergence_terms(backend, X, Y, width)
    return ipx + ipy - 2.0 * cip
