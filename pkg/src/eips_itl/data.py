"""Dataset loading, normalization, Mackey-Glass synthesis and time-delay embedding."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    name: str
    X: np.ndarray
    columns: list[str]

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape


@dataclass
class TimeSeries:
    values: np.ndarray
    dt: float
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)


def _parse_float(tok: str) -> float | None:
    try:
        v = float(tok)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_delimited(path, delimiter: str | None = None, has_header: bool = False,
                   drop_columns=(), name: str | None = None) -> Dataset:
    """Read a comma or whitespace delimited numeric table.

    Columns whose first data value is not numeric (class labels, ids given as
    strings) are dropped with a warning.  ``drop_columns`` removes further
    columns by position, e.g. a numeric class column.  A non-numeric value in
    a numeric column raises :class:`DataError` naming the line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise DataError(f"{path} is empty")
    if delimiter is None:
        delimiter = "," if "," in lines[0][1] else None

    def split(line):
        if delimiter is None:
            return line.split()
        return [t.strip() for t in next(csv.reader([line], delimiter=delimiter))]

    rows = [(lineno, split(ln)) for lineno, ln in lines]
    header = None
    if has_header:
        header = rows[0][1]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path} has no data rows")
    width = len(rows[0][1])
    header = header or [f"c{j}" for j in range(width)]
    if len(header) != width:
        raise DataError(f"{path}: header has {len(header)} fields, data has {width}")

    first = rows[0][1]
    keep = [j for j in range(width) if j not in set(drop_columns)]
    numeric = [j for j in keep if _parse_float(first[j]) is not None]
    dropped = [header[j] for j in keep if j not in numeric]
    if dropped:
        log.warning("%s: dropping non-numeric columns %s", path.name, dropped)
    if not numeric:
        raise DataError(f"{path} has no numeric columns")

    X = np.empty((len(rows), len(numeric)))
    for r, (lineno, toks) in enumerate(rows):
        if len(toks) != width:
            raise DataError(f"{path}:{lineno}: expected {width} fields, found {len(toks)}")
        for c, j in enumerate(numeric):
            v = _parse_float(toks[j])
            if v is None:
                raise DataError(f"{path}:{lineno}: non-numeric value {toks[j]!r} in column {header[j]!r}")
            X[r, c] = v
    return Dataset(name or path.stem, X, [header[j] for j in numeric])


def _zscore(X: np.ndarray, ddof: int, columns) -> np.ndarray:
    std = X.std(axis=0, ddof=ddof)
    for j, s in enumerate(std):
        if not s > 0:
            raise DataError(f"column {columns[j]!r} has zero variance")
    return (X - X.mean(axis=0)) / std


def normalize(ds: Dataset, scope: str = "global", ddof: int = 0) -> Dataset:
    """Per-column z-score, then scale the extrema to +-1.

    ``scope="global"`` divides every column by the largest absolute value in
    the whole z-scored table (this reproduces the published benchmark
    values); ``scope="column"`` divides each column by its own maximum.
    ``ddof`` selects population (0) or sample (1) standard deviation; it has
    no effect on the result after max-abs scaling.
    """
    Z = _zscore(np.asarray(ds.X, dtype=float), ddof, ds.columns)
    if scope == "global":
        Z = Z / np.max(np.abs(Z))
    elif scope == "column":
        Z = Z / np.max(np.abs(Z), axis=0)
    else:
        raise ConfigError(f"unknown normalization scope {scope!r}")
    return Dataset(ds.name, Z, list(ds.columns))


def standardize_series(series, ddof: int = 0) -> TimeSeries:
    ts = series if isinstance(series, TimeSeries) else TimeSeries(np.asarray(series, dtype=float), 1.0)
    v = np.asarray(ts.values, dtype=float)
    std = v.std(ddof=ddof)
    if not std > 0:
        raise DataError("cannot standardize a constant series")
    z = (v - v.mean()) / std
    return TimeSeries(z / np.max(np.abs(z)), ts.dt, dict(ts.params))


# ---------------------------------------------------------------------------
# Mackey-Glass


def mackey_glass(n_samples: int, beta: float = 0.2, gamma: float = 0.1, tau: float = 30.0,
                 n: float = 10.0, dt: float = 6.0, x0: float = 0.9, burn_in: int = 1000,
                 h: float = 0.1) -> TimeSeries:
    """Integrate ``x' = beta x(t-tau) / (1 + x(t-tau)^n) - gamma x(t)`` with RK4.

    The history is constant ``x0`` for ``t <= 0``.  Delayed values at RK4
    stage times are linearly interpolated on the fine grid of step ``h``.
    Every ``dt / h``-th grid point is emitted; the first ``burn_in`` emitted
    points are discarded.  The first emitted point (with ``burn_in=0``) is
    ``x(0) = x0``.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    if not (dt > 0 and h > 0):
        raise ConfigError("dt and h must be positive")
    stride = dt / h
    if abs(stride - round(stride)) > 1e-9:
        raise ConfigError(f"dt={dt} is not an integer multiple of the integration step h={h}")
    stride = int(round(stride))
    if tau < h:
        raise ConfigError("tau must be at least one integration step")

    total_steps = (n_samples + burn_in - 1) * stride
    xs = np.empty(total_steps + 1)
    xs[0] = x0
    lag = tau / h
    if abs(lag - round(lag)) < 1e-9:
        lag = float(round(lag))

    def delayed(pos: float) -> float:
        # pos is a (fractional) grid index; non-positive times use the history
        if pos <= 0.0:
            return x0
        i = int(pos)
        frac = pos - i
        if frac == 0.0:
            return xs[i]
        return xs[i] + frac * (xs[i + 1] - xs[i])

    def f(x, xd):
        return beta * xd / (1.0 + xd**n) - gamma * x

    x = x0
    for k in range(total_steps):
        d0 = delayed(k - lag)
        dh = delayed(k + 0.5 - lag)
        d1 = delayed(k + 1 - lag)
        k1 = f(x, d0)
        k2 = f(x + 0.5 * h * k1, dh)
        k3 = f(x + 0.5 * h * k2, dh)
        k4 = f(x + h * k3, d1)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        xs[k + 1] = x

    values = xs[burn_in * stride :: stride][:n_samples].copy()
    params = dict(beta=beta, gamma=gamma, tau=tau, n=n, dt=dt, x0=x0, burn_in=burn_in, h=h,
                  n_samples=n_samples)
    return TimeSeries(values, dt, params)


def write_series(ts: TimeSeries, path) -> tuple[Path, Path]:
    """Write values as a one-column CSV plus a ``.json`` sidecar of parameters."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("x\n")
        for v in ts.values:
            fh.write(f"{float(v)!r}\n")
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps({"dt": ts.dt, "params": ts.params}, indent=2, sort_keys=True))
    return path, sidecar


def read_series(path) -> TimeSeries:
    path = Path(path)
    values = np.loadtxt(path, skiprows=1, ndmin=1)
    sidecar = path.with_suffix(path.suffix + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {"dt": 1.0, "params": {}}
    return TimeSeries(values, meta["dt"], meta["params"])


def embed(series, d: int = 7, horizon: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Time-delay embedding for ``horizon``-step-ahead prediction.

    Row ``i`` is ``s[i : i+d]`` and its target ``s[i+d-1+horizon]``.
    """
    s = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    if d < 1 or horizon < 1:
        raise ConfigError("d and horizon must be >= 1")
    if len(s) <= d + horizon - 1:
        raise DataError(f"series of length {len(s)} too short for d={d}, horizon={horizon}")
    M = len(s) - d - horizon + 1
    X = np.lib.stride_tricks.sliding_window_view(s, d)[:M].copy()
    y = s[d - 1 + horizon : d - 1 + horizon + M].copy()
    return X, y


@dataclass(frozen=True)
class Split:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    start: int


def mg_trial_split(X: np.ndarray, y: np.ndarray, trial: int, base_seed: int = 0,
                   n_train: int = 2000, n_test: int = 200) -> Split:
    """Random contiguous train span followed immediately by the test span.

    The start is uniform over all valid offsets, drawn from a generator
    seeded with ``base_seed + trial``.
    """
    M = X.shape[0]
    if M < n_train + n_test:
        raise DataError(f"embedded series has {M} rows, need {n_train + n_test}")
    rng = np.random.default_rng(base_seed + trial)
    start = int(rng.integers(0, M - n_train - n_test + 1))
    a, b, c = start, start + n_train, start + n_train + n_test
    return Split(X[a:b], y[a:b], X[b:c], y[b:c], start)
