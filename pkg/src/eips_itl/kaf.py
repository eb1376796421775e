"""Online kernel adaptive filters with correntropy and error-entropy costs.

Explicit-feature ("no-trick") filters keep a weight vector ``w`` in the
feature space of a :class:`~eips_itl.features.FeatureMap`, so every update
costs the same regardless of how many samples have been seen:

* :class:`NTKLMS` - least mean squares in feature space.
* :class:`NTKMCC` - maximum correntropy, ``w += eta exp(-e^2/2 s^2) e z(x)``.
* :class:`NTKMEE` - minimum error entropy; ascends the full (double-sum)
  information potential of the errors on the last ``L`` samples.  The error kernel is either
  evaluated pairwise (``error_map=None``) or through an explicit error map,
  which factorises the double sum.
* :class:`NTKMEESIG` - the single-sum stochastic information gradient.

Baselines that grow a dictionary of centres (per-step cost grows with the
dictionary): :class:`KLMS`, :class:`KMCC` (quantized when ``q_factor > 0``),
:class:`KMEESIG` (likewise), plus the linear :class:`LMS` and
:class:`LMEESIG`.

Every filter exposes ``predict(x)`` and ``step(x, y) -> (prediction, error)``.
MEE costs are blind to a constant offset, so the MEE filters carry a bias
equal to the running mean of their training errors; it is added to
predictions but does not enter the entropy gradient.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .features import FeatureMap, build_taylor_map

SQRT2 = math.sqrt(2.0)


def _check_finite(x, y):
    x = np.asarray(x, dtype=float).ravel()
    if not (np.all(np.isfinite(x)) and math.isfinite(y)):
        raise DataError("non-finite filter input")
    return x, float(y)


# ---------------------------------------------------------------------------
# gradients


def ntkmee_direct_gradient(Z: np.ndarray, e: np.ndarray, width: float) -> np.ndarray:
    """Gradient of ``(1/L^2) sum_ij G_width(e_i - e_j)`` w.r.t. the weights.

    ``e_i = y_i - w.z_i`` so the gradient is
    ``(1/(width^2 L^2)) sum_ij G(e_i - e_j) (e_i - e_j) (z_i - z_j)``, computed
    with pairwise Gaussian evaluations of the error kernel.
    """
    L = len(e)
    if L < 2:
        return np.zeros(Z.shape[1])
    de = e[:, None] - e[None, :]
    M = np.exp(-de * de / (2.0 * width * width)) * de
    # M is antisymmetric, so sum_ij M_ij (z_i - z_j) = 2 sum_i (sum_j M_ij) z_i
    return 2.0 * (M.sum(axis=1) @ Z) / (width * width * L * L)


def ntkmee_full_gradient(Z: np.ndarray, e: np.ndarray, err_map: FeatureMap) -> np.ndarray:
    """Factorised information-potential gradient using an explicit error map.

    With ``G(e_i - e_j) ~ z_e(e_i) . z_e(e_j)`` the double sum collapses to

        2 (A b - E c),  A = sum_i e_i z_i z_e(e_i)^T,  b = sum_j z_e(e_j),
                        c = sum_i e_i z_e(e_i),        E = sum_j z_j z_e(e_j)^T

    at cost O(L D D_e).  The error-kernel width is ``err_map.sigma``.  Fewer
    than two history entries give a zero gradient.
    """
    L = len(e)
    if L < 2:
        return np.zeros(Z.shape[1])
    Ze = err_map.map_batch(np.asarray(e, dtype=float)[:, None])
    eZ = Z * e[:, None]
    Ab = eZ.T @ (Ze @ Ze.sum(axis=0))
    Ec = Z.T @ (Ze @ (Ze.T @ e))
    s = err_map.sigma
    return 2.0 * (Ab - Ec) / (s * s * L * L)


def windowed_ip(e: np.ndarray, width: float) -> float:
    """``(1/L^2) sum_ij G_width(e_i - e_j)`` over an error window."""
    e = np.asarray(e, dtype=float)
    if len(e) == 0:
        return float("nan")
    de = e[:, None] - e[None, :]
    return float(np.exp(-de * de / (2.0 * width * width)).mean())


def sig_gradient(X_window: np.ndarray, e_window: np.ndarray, x_n: np.ndarray, e_n: float,
                 sigma: float) -> np.ndarray:
    """Stochastic information gradient over a trailing window.

    ``(1/(sigma^2 L)) sum_i G_sigma(e_n - e_i) (e_n - e_i) (x_n - x_i)``; the
    regressor may be a raw input or a feature vector.  An empty window gives
    zeros.
    """
    L = len(e_window)
    if L == 0:
        return np.zeros_like(np.asarray(x_n, dtype=float))
    g = _sig_weights(np.asarray(e_window), e_n, sigma)
    return (g.sum() * x_n - g @ X_window) / (sigma * sigma * L)


def _sig_weights(e_window, e_n, sigma):
    de = e_n - e_window
    return np.exp(-de * de / (2.0 * sigma * sigma)) * de


class _Ring:
    """Fixed-capacity FIFO of (regressor, value) pairs kept in arrays."""

    def __init__(self, capacity: int, dim: int):
        self.capacity = capacity
        self.X = np.zeros((capacity, dim))
        self.e = np.zeros(capacity)
        self.size = 0
        self.head = 0

    def push(self, x, e):
        self.X[self.head] = x
        self.e[self.head] = e
        self.head = (self.head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def arrays(self):
        # order is irrelevant for the sums these feed
        return self.X[: self.size], self.e[: self.size]

    def ordered(self):
        if self.size < self.capacity:
            return self.X[: self.size].copy(), self.e[: self.size].copy()
        idx = np.r_[self.head : self.capacity, 0 : self.head]
        return self.X[idx], self.e[idx]

    def to_dict(self):
        X, e = self.ordered()
        return {"capacity": self.capacity, "X": X.tolist(), "e": e.tolist()}

    @classmethod
    def from_dict(cls, doc, dim):
        ring = cls(doc["capacity"], dim)
        for x, e in zip(doc["X"], doc["e"]):
            ring.push(x, e)
        return ring


# ---------------------------------------------------------------------------
# explicit-feature filters


class NTKLMS:
    name = "ntklms"

    def __init__(self, fm: FeatureMap, eta: float = 0.4):
        if not eta > 0:
            raise ConfigError("eta must be positive")
        self.fm = fm
        self.eta = float(eta)
        self.w = np.zeros(fm.feature_dim)
        self.n_updates = 0

    @property
    def model_size(self) -> int:
        return self.fm.feature_dim

    def predict(self, x) -> float:
        return float(self.fm.map(x) @ self.w)

    def predict_batch(self, X) -> np.ndarray:
        return self.fm.map_batch(X) @ self.w

    def _gain(self, e: float) -> float:
        return self.eta * e

    def step(self, x, y):
        x, y = _check_finite(x, y)
        z = self.fm.map(x)
        pred = float(z @ self.w)
        e = y - pred
        w = self.w + self._gain(e) * z
        if not np.all(np.isfinite(w)):
            raise NumericalError("filter weights diverged")
        self.w = w
        self.n_updates += 1
        return pred, e

    def _hyper(self):
        return {"eta": self.eta}

    def state_dict(self) -> dict:
        return {"filter": self.name, "feature_map": self.fm.to_dict(), "w": self.w.tolist(),
                "n_updates": self.n_updates, "hyper": self._hyper()}

    @classmethod
    def from_state(cls, doc: dict):
        obj = cls(FeatureMap.from_dict(doc["feature_map"]), **doc["hyper"])
        obj.w = np.asarray(doc["w"], dtype=float)
        obj.n_updates = doc["n_updates"]
        return obj


class NTKMCC(NTKLMS):
    name = "ntkmcc"

    def __init__(self, fm: FeatureMap, eta: float = 0.4, sigma_c: float = 1 / SQRT2):
        super().__init__(fm, eta)
        if not sigma_c > 0:
            raise ConfigError("sigma_c must be positive")
        self.sigma_c = float(sigma_c)

    def _gain(self, e: float) -> float:
        return self.eta * math.exp(-e * e / (2.0 * self.sigma_c**2)) * e

    def _hyper(self):
        return {"eta": self.eta, "sigma_c": self.sigma_c}


class NTKMEE(NTKLMS):
    """Full information-potential ascent over the last ``window`` errors.

    The window keeps feature vectors and targets; its errors are recomputed
    under the current weights before every gradient evaluation, so the step
    ascends the windowed IP of the filter as it stands (O(L D) extra work,
    still constant in the number of updates).
    ``error_map=None`` evaluates the error kernel pairwise (O(L^2) per
    step); otherwise the supplied map factorises it (O(L D D_e)).
    ``error_width`` defaults to ``sqrt(2) sigma_c``; an explicit
    ``error_map`` carries its own width.
    """

    name = "ntkmee"

    def __init__(self, fm: FeatureMap, eta: float = 0.4, sigma_c: float = 1 / SQRT2, window: int = 200,
                 error_map: FeatureMap | None = None, error_width: float | None = None):
        super().__init__(fm, eta)
        if window < 1:
            raise ConfigError("window must be >= 1")
        self.sigma_c = float(sigma_c)
        self.window = int(window)
        self.error_map = error_map
        self.error_width = error_map.sigma if error_map is not None else (
            SQRT2 * self.sigma_c if error_width is None else float(error_width))
        self.history = _Ring(self.window, fm.feature_dim)
        self.bias = 0.0

    @classmethod
    def with_taylor_errors(cls, fm, degree: int = 4, **kwargs):
        sigma_c = kwargs.get("sigma_c", 1 / SQRT2)
        width = kwargs.pop("error_width", None) or SQRT2 * sigma_c
        return cls(fm, error_map=build_taylor_map(1, degree, width), **kwargs)

    def predict(self, x) -> float:
        return super().predict(x) + self.bias

    def predict_batch(self, X) -> np.ndarray:
        return super().predict_batch(X) + self.bias

    def window_errors(self) -> tuple[np.ndarray, np.ndarray]:
        """Feature vectors of the window and their errors under the current weights."""
        Z, y = self.history.arrays()
        return Z, y - Z @ self.w

    def gradient(self) -> np.ndarray:
        Z, e = self.window_errors()
        if self.error_map is None:
            return ntkmee_direct_gradient(Z, e, self.error_width)
        return ntkmee_full_gradient(Z, e, self.error_map)

    def step(self, x, y):
        x, y = _check_finite(x, y)
        z = self.fm.map(x)
        raw = float(z @ self.w)
        e = y - raw
        self.history.push(z, y)
        w = self.w + self.eta * self.gradient()
        if not np.all(np.isfinite(w)):
            raise NumericalError("filter weights diverged")
        self.w = w
        self.n_updates += 1
        pred = raw + self.bias
        self.bias += (e - self.bias) / self.n_updates
        return pred, y - pred

    def recent_errors(self) -> np.ndarray:
        return self.window_errors()[1]

    def _hyper(self):
        return {"eta": self.eta, "sigma_c": self.sigma_c, "window": self.window,
                "error_width": self.error_width}

    def state_dict(self) -> dict:
        doc = super().state_dict()
        doc["error_map"] = None if self.error_map is None else self.error_map.to_dict()
        doc["history"] = self.history.to_dict()
        doc["bias"] = self.bias
        return doc

    @classmethod
    def from_state(cls, doc: dict):
        hyper = dict(doc["hyper"])
        err = doc.get("error_map")
        if err is not None:
            hyper.pop("error_width", None)
        fm = FeatureMap.from_dict(doc["feature_map"])
        obj = cls(fm, error_map=None if err is None else FeatureMap.from_dict(err), **hyper)
        obj.w = np.asarray(doc["w"], dtype=float)
        obj.n_updates = doc["n_updates"]
        obj.history = _Ring.from_dict(doc["history"], fm.feature_dim)
        obj.bias = doc["bias"]
        return obj


class NTKMEESIG(NTKMEE):
    """Explicit-feature MEE with the single-sum stochastic information gradient."""

    name = "ntkmee-sig"

    def step(self, x, y):
        x, y = _check_finite(x, y)
        z = self.fm.map(x)
        raw = float(z @ self.w)
        e = y - raw
        Zw, ew = self.history.arrays()
        w = self.w + self.eta * sig_gradient(Zw, ew, z, e, self.sigma_c)
        if not np.all(np.isfinite(w)):
            raise NumericalError("filter weights diverged")
        self.w = w
        self.history.push(z, e)
        self.n_updates += 1
        pred = raw + self.bias
        self.bias += (e - self.bias) / self.n_updates
        return pred, y - pred


# ---------------------------------------------------------------------------
# growing-dictionary baselines


class KLMS:
    """Kernel LMS with an optional quantized dictionary (``q_factor > 0``)."""

    name = "klms"

    def __init__(self, sigma: float = 1 / SQRT2, eta: float = 0.4, q_factor: float = 0.0):
        if not (sigma > 0 and eta > 0 and q_factor >= 0):
            raise ConfigError("invalid dictionary filter parameters")
        self.sigma = float(sigma)
        self.eta = float(eta)
        self.q_factor = float(q_factor)
        self.centers = None
        self.coeffs = np.zeros(0)
        self.size = 0
        self.n_updates = 0

    @property
    def model_size(self) -> int:
        return self.size

    def _append(self, x, a) -> int:
        if self.centers is None:
            self.centers = np.zeros((64, len(x)))
            self.coeffs = np.zeros(64)
        elif self.size == len(self.coeffs):
            self.centers = np.vstack([self.centers, np.zeros_like(self.centers)])
            self.coeffs = np.concatenate([self.coeffs, np.zeros_like(self.coeffs)])
        self.centers[self.size] = x
        self.coeffs[self.size] = a
        self.size += 1
        return self.size - 1

    def _sqdist(self, x):
        diff = self.centers[: self.size] - x
        return np.einsum("ij,ij->i", diff, diff)

    def _evaluate(self, x):
        if self.size == 0:
            return 0.0, None
        sq = self._sqdist(x)
        k = np.exp(-sq / (2.0 * self.sigma**2))
        return float(k @ self.coeffs[: self.size]), sq

    def predict(self, x) -> float:
        return self._evaluate(np.asarray(x, dtype=float).ravel())[0]

    def predict_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.size == 0:
            return np.zeros(len(X))
        C = self.centers[: self.size]
        sq = np.sum(X * X, 1)[:, None] + np.sum(C * C, 1)[None, :] - 2.0 * X @ C.T
        return np.exp(-np.maximum(sq, 0.0) / (2.0 * self.sigma**2)) @ self.coeffs[: self.size]

    def _gain(self, e):
        return self.eta * e

    def _place(self, x, a, sq) -> int:
        """Merge ``a`` into the nearest centre or add a new centre.

        Merging happens when the squared distance to the nearest centre is
        below ``q_factor``.
        """
        if self.q_factor > 0 and sq is not None:
            j = int(np.argmin(sq))
            if sq[j] < self.q_factor:
                self.coeffs[j] += a
                return j
        return self._append(x, a)

    def step(self, x, y):
        x, y = _check_finite(x, y)
        pred, sq = self._evaluate(x)
        e = y - pred
        self._place(x, self._gain(e), sq)
        self.n_updates += 1
        return pred, e


class KMCC(KLMS):
    name = "kmcc"

    def __init__(self, sigma: float = 1 / SQRT2, eta: float = 0.4, sigma_c: float = 1 / SQRT2,
                 q_factor: float = 0.0):
        super().__init__(sigma, eta, q_factor)
        self.sigma_c = float(sigma_c)

    def _gain(self, e):
        return self.eta * math.exp(-e * e / (2.0 * self.sigma_c**2)) * e


class QKMCC(KMCC):
    name = "qkmcc"

    def __init__(self, sigma: float = 1 / SQRT2, eta: float = 0.4, sigma_c: float = 1 / SQRT2,
                 q_factor: float = 0.07):
        super().__init__(sigma, eta, sigma_c, q_factor)


class KMEESIG(KLMS):
    """Kernel MEE with the stochastic information gradient.

    Each step adds ``c sum_i g_i`` at the new sample's centre and subtracts
    ``c g_i`` at the centre of each windowed sample, ``c = eta/(sigma_c^2 L)``
    and ``g_i = G(e_n - e_i)(e_n - e_i)``.
    """

    name = "kmee-sig"

    def __init__(self, sigma: float = 1 / SQRT2, eta: float = 0.4, sigma_c: float = 1 / SQRT2,
                 window: int = 200, q_factor: float = 0.0):
        super().__init__(sigma, eta, q_factor)
        self.sigma_c = float(sigma_c)
        self.window = int(window)
        self._hist_idx = np.zeros(self.window, dtype=int)
        self._hist_e = np.zeros(self.window)
        self._hist_n = 0
        self._head = 0
        self.bias = 0.0

    def predict(self, x) -> float:
        return super().predict(x) + self.bias

    def predict_batch(self, X) -> np.ndarray:
        return super().predict_batch(X) + self.bias

    def recent_errors(self) -> np.ndarray:
        return self._hist_e[: self._hist_n]

    def step(self, x, y):
        x, y = _check_finite(x, y)
        raw, sq = self._evaluate(x)
        e = y - raw
        L = self._hist_n
        if L:
            idx = self._hist_idx[:L]
            g = _sig_weights(self._hist_e[:L], e, self.sigma_c)
            c = self.eta / (self.sigma_c**2 * L)
            np.subtract.at(self.coeffs, idx, c * g)
            j = self._place(x, c * g.sum(), sq)
        else:
            j = self._place(x, 0.0, sq)
        self._hist_idx[self._head] = j
        self._hist_e[self._head] = e
        self._head = (self._head + 1) % self.window
        self._hist_n = min(self._hist_n + 1, self.window)
        self.n_updates += 1
        pred = raw + self.bias
        self.bias += (e - self.bias) / self.n_updates
        return pred, y - pred


class QKMEESIG(KMEESIG):
    name = "qkmee-sig"

    def __init__(self, sigma: float = 1 / SQRT2, eta: float = 0.4, sigma_c: float = 1 / SQRT2,
                 window: int = 200, q_factor: float = 0.07):
        super().__init__(sigma, eta, sigma_c, window, q_factor)


# ---------------------------------------------------------------------------
# linear baselines


class LMS:
    name = "lms"

    def __init__(self, d: int, eta: float = 0.4):
        self.w = np.zeros(d)
        self.eta = float(eta)
        self.n_updates = 0

    @property
    def model_size(self) -> int:
        return len(self.w)

    def predict(self, x) -> float:
        return float(np.asarray(x, dtype=float) @ self.w)

    def predict_batch(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.w

    def step(self, x, y):
        x, y = _check_finite(x, y)
        pred = float(x @ self.w)
        e = y - pred
        self.w = self.w + self.eta * e * x
        self.n_updates += 1
        return pred, e


class LMEESIG(LMS):
    name = "lmee-sig"

    def __init__(self, d: int, eta: float = 0.4, sigma_c: float = 1 / SQRT2, window: int = 200):
        super().__init__(d, eta)
        self.sigma_c = float(sigma_c)
        self.history = _Ring(int(window), d)
        self.bias = 0.0

    def predict(self, x) -> float:
        return super().predict(x) + self.bias

    def predict_batch(self, X) -> np.ndarray:
        return super().predict_batch(X) + self.bias

    def recent_errors(self) -> np.ndarray:
        return self.history.arrays()[1]

    def step(self, x, y):
        x, y = _check_finite(x, y)
        raw = float(x @ self.w)
        e = y - raw
        Xw, ew = self.history.arrays()
        self.w = self.w + self.eta * sig_gradient(Xw, ew, x, e, self.sigma_c)
        self.history.push(x, e)
        self.n_updates += 1
        pred = raw + self.bias
        self.bias += (e - self.bias) / self.n_updates
        return pred, y - pred
