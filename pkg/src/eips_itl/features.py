"""Explicit feature maps whose inner products define finite-rank Gaussian-like kernels.

Three families are provided:

* Taylor polynomial features (deterministic), one feature per distinct monomial
  of degree ``<= r``, scaled by the square root of its multinomial count.
* Gauss-Hermite quadrature features (hybrid): a polynomial-exact 1-D rule,
  tensorised over the input dimensions and subsampled in proportion to the
  product weights.
* Random Fourier features (random), in the paired cos/sin and the
  phase-shifted cosine variants.

All maps approximate ``k(x, x') = exp(-||x - x'||^2 / (2 sigma^2))`` and are
immutable once built.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigError, NumericalError

DEFAULT_FEATURE_CAP = 1_000_000


class MapKind(str, enum.Enum):
    TAYLOR = "taylor"
    GAUSS_QUADRATURE = "gq"
    RFF_PAIRED = "rff-paired"
    RFF_SHIFTED = "rff-shifted"


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """An explicit map ``z: R^d -> R^D``.

    ``params`` holds the kind-specific payload as read-only numpy arrays:

    * Taylor: ``exponents`` (D, d), ``coef`` (D,), ``parent`` and ``var``
      (D,) describing how each monomial extends a lower-degree one.
    * GQ / RffPaired: ``omega`` (D/2, d) frequencies (already divided by
      sigma) and ``amplitude`` (D/2,) weights; features are interleaved
      ``sqrt(a_i) cos(w_i.x), sqrt(a_i) sin(w_i.x)``.
    * RffShifted: ``omega`` (D, d) and ``phase`` (D,).

    ``build`` records the constructor arguments so random kinds can be
    regenerated from their seed.
    """

    kind: MapKind
    input_dim: int
    feature_dim: int
    sigma: float
    seed: int | None
    params: dict[str, np.ndarray]
    build: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for arr in self.params.values():
            arr.setflags(write=False)

    def __call__(self, x) -> np.ndarray:
        return self.map(x)

    def map(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape != (self.input_dim,):
            raise ConfigError(f"expected input of shape ({self.input_dim},), got {x.shape}")
        return self.map_batch(x[None, :])[0]

    def map_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 and self.input_dim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ConfigError(f"expected (N, {self.input_dim}) input, got shape {X.shape}")
        if X.shape[0] == 0:
            return np.zeros((0, self.feature_dim))
        if self.kind is MapKind.TAYLOR:
            return _taylor_eval(self, X)
        if self.kind is MapKind.RFF_SHIFTED:
            p = self.params
            return math.sqrt(2.0 / self.feature_dim) * np.cos(_project(X, p["omega"]) + p["phase"])
        return _paired_trig_eval(self.params["omega"], self.params["amplitude"], X)

    def kernel(self, x, y) -> float:
        """Induced kernel value ``<z(x), z(y)>``."""
        return float(self.map(x) @ self.map(y))

    def gram(self, X, Y=None) -> np.ndarray:
        ZX = self.map_batch(X)
        ZY = ZX if Y is None else self.map_batch(Y)
        return ZX @ ZY.T

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "d": self.input_dim,
            "D": self.feature_dim,
            "sigma": self.sigma,
            "seed": self.seed,
            "build": dict(self.build),
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> FeatureMap:
        kind = MapKind(doc["kind"])
        d, sigma, seed = int(doc["d"]), float(doc["sigma"]), doc.get("seed")
        build = doc.get("build", {})
        params = doc.get("params")
        if not params:
            # seed-reconstructible path
            if kind is MapKind.TAYLOR:
                return build_taylor_map(d, build["degree"], sigma)
            if kind is MapKind.GAUSS_QUADRATURE:
                return build_gq_map(d, build["degree"], doc["D"], sigma, seed)
            variant = "paired" if kind is MapKind.RFF_PAIRED else "shifted"
            return build_rff_map(d, doc["D"], sigma, variant, seed)
        arrays = {}
        for k, v in params.items():
            dtype = int if k in ("exponents", "parent", "var") else float
            arrays[k] = np.asarray(v, dtype=dtype)
        if kind is MapKind.TAYLOR and "exponents" in arrays:
            arrays["exponents"] = arrays["exponents"].reshape(int(doc["D"]), d)
        if "omega" in arrays:
            arrays["omega"] = arrays["omega"].reshape(-1, d)
        return cls(kind, d, int(doc["D"]), sigma, seed, arrays, dict(build))

    @classmethod
    def from_json(cls, text: str) -> FeatureMap:
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Taylor features


def taylor_feature_count(d: int, r: int) -> int:
    return math.comb(d + r, r)


def taylor_required_degree(eps: float) -> int:
    """Smallest ``r`` with ``e / (r+1)! < eps``.

    This bounds the truncation error of ``exp(t)`` for ``|t| <= 1``.
    """
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"eps must lie in (0, 1), got {eps}")
    r = 0
    while math.e / math.factorial(r + 1) >= eps:
        r += 1
    return r


def _graded_lex(d: int, r: int):
    """Yield index tuples of monomials, degree-major, exponents in descending lex order."""
    for n in range(r + 1):
        yield from itertools.combinations_with_replacement(range(d), n)


def build_taylor_map(d: int, r: int, sigma: float, max_features: int = DEFAULT_FEATURE_CAP) -> FeatureMap:
    """Taylor feature map with one feature per monomial ``x^alpha``, ``|alpha| <= r``.

    ``z_alpha(x) = exp(-||x||^2 / 2 sigma^2) x^alpha / (sigma^|alpha| sqrt(prod alpha_i!))``,
    which equals the ``sqrt(multinomial / (sigma^2n n!))`` scaling of the
    grouped monomials.
    """
    if d < 1 or r < 0 or not sigma > 0:
        raise ConfigError(f"invalid Taylor map parameters d={d}, r={r}, sigma={sigma}")
    D = taylor_feature_count(d, r)
    if D > sys.maxsize or D > max_features:
        raise ConfigError(f"Taylor map with d={d}, r={r} needs {D} features (cap {max_features})")

    exponents = np.zeros((D, d), dtype=int)
    parent = np.full(D, -1, dtype=int)
    var = np.full(D, -1, dtype=int)
    coef = np.empty(D)
    index = {}
    for i, combo in enumerate(_graded_lex(d, r)):
        index[combo] = i
        for k in combo:
            exponents[i, k] += 1
        if combo:
            parent[i] = index[combo[:-1]]
            var[i] = combo[-1]
        n = len(combo)
        denom = math.prod(math.factorial(int(a)) for a in exponents[i])
        coef[i] = 1.0 / (sigma**n * math.sqrt(denom))
    params = {"exponents": exponents, "coef": coef, "parent": parent, "var": var}
    return FeatureMap(MapKind.TAYLOR, d, D, float(sigma), None, params, {"degree": int(r)})


def _taylor_eval(fm: FeatureMap, X: np.ndarray) -> np.ndarray:
    p = fm.params
    parent, var = p["parent"], p["var"]
    mono = np.empty((X.shape[0], fm.feature_dim))
    mono[:, 0] = 1.0
    # each monomial extends a lower-index one, so a single forward pass suffices
    for i in range(1, fm.feature_dim):
        mono[:, i] = mono[:, parent[i]] * X[:, var[i]]
    envelope = np.exp(-np.sum(X * X, axis=1) / (2.0 * fm.sigma**2))
    return envelope[:, None] * mono * p["coef"]


# ---------------------------------------------------------------------------
# Gauss-Hermite quadrature features


def gauss_hermite(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``n_nodes``-point rule for the weight ``exp(-t^2)``.

    Computed from the eigen-decomposition of the symmetric tridiagonal Jacobi
    matrix (Golub-Welsch).
    """
    if n_nodes < 1:
        raise ConfigError("n_nodes must be >= 1")
    offdiag = np.sqrt(np.arange(1, n_nodes) / 2.0)
    try:
        nodes, vecs = eigh_tridiagonal(np.zeros(n_nodes), offdiag)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Gauss-Hermite eigenproblem failed for {n_nodes} nodes") from exc
    weights = math.sqrt(math.pi) * vecs[0, :] ** 2
    if not (np.all(np.isfinite(nodes)) and np.all(weights > 0)):
        raise NumericalError(f"Gauss-Hermite rule with {n_nodes} nodes is numerically unreliable")
    if abs(weights.sum() - math.sqrt(math.pi)) > 1e-10 * math.sqrt(math.pi):
        raise NumericalError(f"Gauss-Hermite weights for {n_nodes} nodes do not sum to sqrt(pi)")
    return nodes, weights


def gq_nodes_for_degree(degree: int) -> int:
    # an m-node rule is exact up to degree 2m - 1
    return (degree + 2) // 2


def build_gq_map(d: int, degree: int, D_target: int, sigma: float, seed: int) -> FeatureMap:
    """Subsampled dense-grid Gauss-Hermite feature map with ``D_target`` features.

    ``D_target / 2`` grid points are drawn with replacement with probability
    proportional to the product weight; each contributes a cos and a sin
    feature.  Sampling a grid point from the product weight is done one
    coordinate at a time, which is the same distribution without
    materialising the ``m^d`` grid.
    """
    if d < 1 or degree < 1 or D_target < 1 or not sigma > 0:
        raise ConfigError(f"invalid GQ map parameters d={d}, degree={degree}, D={D_target}, sigma={sigma}")
    if D_target % 2:
        raise ConfigError(f"GQ maps need an even feature count, got {D_target}")
    nodes, weights = gauss_hermite(gq_nodes_for_degree(degree))
    # N(0, 1) frequencies: omega = sqrt(2) t, probability w / sqrt(pi)
    prob = weights / weights.sum()
    n_freq = D_target // 2
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(nodes), size=(n_freq, d), p=prob)
    omega = math.sqrt(2.0) * nodes[idx] / sigma
    # importance ratio (sum |W| * sign W) is 1 for the all-positive Hermite weights
    amplitude = np.full(n_freq, 1.0 / n_freq)
    params = {"omega": omega, "amplitude": amplitude}
    return FeatureMap(MapKind.GAUSS_QUADRATURE, d, D_target, float(sigma), int(seed), params, {"degree": int(degree)})


# ---------------------------------------------------------------------------
# Random Fourier features


def build_rff_map(d: int, D: int, sigma: float, variant: str = "paired", seed: int = 0) -> FeatureMap:
    """Random Fourier features with ``omega ~ N(0, sigma^-2 I)``.

    ``variant="paired"`` uses ``D/2`` frequencies with cos and sin entries;
    ``variant="shifted"`` uses ``D`` frequencies and uniform phases.
    """
    if d < 1 or D < 1 or not sigma > 0:
        raise ConfigError(f"invalid RFF parameters d={d}, D={D}, sigma={sigma}")
    rng = np.random.default_rng(seed)
    if variant == "paired":
        if D % 2:
            raise ConfigError(f"paired RFF needs an even feature count, got {D}")
        omega = rng.standard_normal((D // 2, d)) / sigma
        params = {"omega": omega, "amplitude": np.full(D // 2, 2.0 / D)}
        kind = MapKind.RFF_PAIRED
    elif variant == "shifted":
        omega = rng.standard_normal((D, d)) / sigma
        params = {"omega": omega, "phase": rng.uniform(0.0, 2.0 * math.pi, D)}
        kind = MapKind.RFF_SHIFTED
    else:
        raise ConfigError(f"unknown RFF variant {variant!r}")
    return FeatureMap(kind, d, D, float(sigma), int(seed), params, {"variant": variant})


def _project(X: np.ndarray, omega: np.ndarray) -> np.ndarray:
    # einsum keeps the summation order per row fixed, so map and map_batch agree bit for bit
    return np.einsum("nd,kd->nk", X, omega)


def _paired_trig_eval(omega: np.ndarray, amplitude: np.ndarray, X: np.ndarray) -> np.ndarray:
    proj = _project(X, omega)
    scale = np.sqrt(amplitude)
    out = np.empty((X.shape[0], 2 * omega.shape[0]))
    out[:, 0::2] = scale * np.cos(proj)
    out[:, 1::2] = scale * np.sin(proj)
    return out


def build_map(kind: str | MapKind, d: int, sigma: float, *, degree: int | None = None,
              n_features: int | None = None, seed: int = 0) -> FeatureMap:
    """Dispatch helper used by the CLI and the estimator backends."""
    kind = MapKind(kind)
    if kind is MapKind.TAYLOR:
        return build_taylor_map(d, 9 if degree is None else degree, sigma)
    if n_features is None:
        raise ConfigError(f"{kind.value} maps need a feature count")
    if kind is MapKind.GAUSS_QUADRATURE:
        return build_gq_map(d, 8 if degree is None else degree, n_features, sigma, seed)
    variant = "paired" if kind is MapKind.RFF_PAIRED else "shifted"
    return build_rff_map(d, n_features, sigma, variant, seed)


def map_batch(fm: FeatureMap, X) -> np.ndarray:
    return fm.map_batch(X)
