"""Experiment runners behind the command-line interface.

Three drivers:

* :func:`run_estimate` accumulates a descriptor over every feature pair of a
  normalized dataset and times the estimator.
* :func:`run_kaf` runs the Mackey-Glass prediction protocol for one filter
  and returns long-format :class:`ExperimentRecord` rows.
* :func:`run_bench` times the information potential of each backend on
  synthetic 1-D data across a ladder of sample sizes.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import itl, kaf
from .data import Dataset, embed, mackey_glass, mg_trial_split, standardize_series
from .errors import ConfigError
from .features import build_map

SQRT2 = math.sqrt(2.0)
DEFAULT_SIGMA = 1 / SQRT2


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class ExperimentRecord:
    """One long-format observation.

    ``trial`` is ``-1`` on rows averaged over trials.  ``cpu_seconds`` is the
    cumulative CPU time spent in filter updates up to ``iteration``.
    """

    experiment: str
    method: str
    trial: int
    iteration: int
    metric: str
    value: float
    cpu_seconds: float
    model_size: int


RECORD_FIELDS = [f.name for f in fields(ExperimentRecord)]
ESTIMATE_FIELDS = ["dataset", "n", "dim", "descriptor", "backend", "config", "pairs", "trials",
                   "value", "mean_cpu_s", "mean_rank"]
BENCH_FIELDS = ["backend", "n", "repeats", "median_s", "iqr_s", "value"]


# ---------------------------------------------------------------------------
# estimate


def _joint_ip(backend, x, y):
    return itl.information_potential(backend, np.column_stack([x, y]))


DESCRIPTORS = {
    "cc": itl.correntropy_coefficient,
    "qmi-cs": itl.qmi_cs,
    "qmi-ed": itl.qmi_ed,
    "ip": _joint_ip,
    "cip": itl.cross_information_potential,
    "dcs": itl.divergence_cs,
    "ded": itl.divergence_ed,
}
BACKENDS = ("direct", "icd", "eips")


@dataclass
class BackendSpec:
    """Recipe for a fresh backend; ``map_kind``/``degree``/``n_features`` apply to EIPS."""

    name: str = "direct"
    sigma: float = DEFAULT_SIGMA
    epsilon: float = 1e-6
    map_kind: str = "taylor"
    degree: int | None = None
    n_features: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.name not in BACKENDS:
            raise ConfigError(f"unknown backend {self.name!r}; choose from {', '.join(BACKENDS)}")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")

    def build(self):
        if self.name == "direct":
            return itl.Direct(self.sigma)
        if self.name == "icd":
            return itl.Icd(self.sigma, self.epsilon)
        return itl.Eips(self.sigma, kind=self.map_kind, degree=self.degree, n_features=self.n_features,
                        seed=self.seed)

    def describe(self) -> str:
        if self.name == "direct":
            return f"sigma={self.sigma:.6g}"
        if self.name == "icd":
            return f"sigma={self.sigma:.6g};eps={self.epsilon:g}"
        extra = f"r={9 if self.degree is None else self.degree}" if self.map_kind == "taylor" else (
            f"degree={self.degree};D={self.n_features}" if self.map_kind == "gq" else f"D={self.n_features}")
        return f"sigma={self.sigma:.6g};map={self.map_kind};{extra};seed={self.seed}"


def accumulate_pairs(X: np.ndarray, descriptor: str, backend) -> float:
    """Sum ``descriptor`` over all column pairs ``(i, j)``, ``i < j``."""
    try:
        fn = DESCRIPTORS[descriptor]
    except KeyError:
        raise ConfigError(f"unknown descriptor {descriptor!r}; choose from {', '.join(DESCRIPTORS)}") from None
    total = 0.0
    for i, j in itertools.combinations(range(X.shape[1]), 2):
        total += fn(backend, X[:, i], X[:, j])
    return total


def run_estimate(ds: Dataset, descriptor: str, spec: BackendSpec, trials: int = 1,
                 include_setup: bool = False) -> dict | None:
    """Accumulated descriptor value and mean CPU time per trial for a normalized dataset.

    Feature-map construction is excluded from the timing unless
    ``include_setup``; maps are then rebuilt inside every timed trial.
    Returns ``None`` for ``trials == 0``.
    """
    if descriptor not in DESCRIPTORS:
        raise ConfigError(f"unknown descriptor {descriptor!r}; choose from {', '.join(DESCRIPTORS)}")
    if trials < 0:
        raise ConfigError("trials must be >= 0")
    if trials == 0:
        return None
    X = np.asarray(ds.X, dtype=float)
    if X.shape[1] < 2:
        raise ConfigError("estimate needs at least two columns")
    backend = spec.build()
    if spec.name == "eips" and not include_setup:
        accumulate_pairs(X, descriptor, backend)  # warms the map cache
    values, times, ranks = [], [], []
    for _ in range(trials):
        if spec.name == "eips" and include_setup:
            backend.maps.clear()
        if spec.name == "icd":
            backend.rank_log.clear()
        t0 = time.process_time()
        values.append(accumulate_pairs(X, descriptor, backend))
        times.append(time.process_time() - t0)
        if spec.name == "icd":
            ranks.append(float(np.mean(backend.rank_log)))
    return {
        "dataset": ds.name, "n": X.shape[0], "dim": X.shape[1], "descriptor": descriptor,
        "backend": spec.name, "config": spec.describe(), "pairs": X.shape[1] * (X.shape[1] - 1) // 2,
        "trials": trials, "value": float(np.mean(values)), "mean_cpu_s": float(np.mean(times)),
        "mean_rank": float(np.mean(ranks)) if ranks else None,
    }


# ---------------------------------------------------------------------------
# kernel adaptive filtering on Mackey-Glass


ALGORITHMS = ("ntklms", "ntkmcc", "ntkmee", "ntkmee-ts", "ntkmee-sig", "klms", "kmcc", "qkmcc",
              "kmee-sig", "qkmee-sig", "lms", "lmee-sig")
_EXPLICIT = {"ntklms", "ntkmcc", "ntkmee", "ntkmee-ts", "ntkmee-sig"}


@dataclass
class KafConfig:
    """Mackey-Glass protocol and filter hyperparameters.

    ``q_factor=None`` means the algorithm default (0.07 for the quantized
    filters, 0 otherwise).  The feature map of trial ``t`` is seeded with
    ``seed + t``, as is the train/test split.
    """

    algorithm: str = "ntkmcc"
    map_kind: str = "gq"
    degree: int | None = 8
    n_features: int | None = 330
    eta: float = 0.4
    sigma: float = DEFAULT_SIGMA
    sigma_c: float = DEFAULT_SIGMA
    window: int = 200
    q_factor: float | None = None
    err_degree: int = 4
    embed_dim: int = 7
    n_train: int = 2000
    n_test: int = 200
    eval_every: int = 10
    series_length: int = 5000
    trials: int = 1
    seed: int = 0
    workers: int = 1
    mg: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if not (self.eta > 0 and self.sigma > 0 and self.sigma_c > 0):
            raise ConfigError("eta, sigma and sigma_c must be positive")
        if self.window < 1 or self.eval_every < 1 or self.n_train < 1 or self.n_test < 1:
            raise ConfigError("window, eval_every, n_train and n_test must be >= 1")
        if self.trials < 0 or self.workers < 1:
            raise ConfigError("trials must be >= 0 and workers >= 1")
        if self.q_factor is not None and self.q_factor < 0:
            raise ConfigError("q_factor must be >= 0")


def mg_dataset(cfg: KafConfig) -> tuple[np.ndarray, np.ndarray]:
    """Standardized Mackey-Glass series embedded for one-step prediction."""
    ts = standardize_series(mackey_glass(cfg.series_length, **cfg.mg))
    return embed(ts, cfg.embed_dim, 1)


def make_filter(cfg: KafConfig, trial: int = 0):
    algo = cfg.algorithm
    if algo in _EXPLICIT:
        fm = build_map(cfg.map_kind, cfg.embed_dim, cfg.sigma, degree=cfg.degree, n_features=cfg.n_features,
                       seed=cfg.seed + trial)
        if algo == "ntklms":
            return kaf.NTKLMS(fm, cfg.eta)
        if algo == "ntkmcc":
            return kaf.NTKMCC(fm, cfg.eta, cfg.sigma_c)
        if algo == "ntkmee":
            return kaf.NTKMEE(fm, cfg.eta, cfg.sigma_c, cfg.window)
        if algo == "ntkmee-ts":
            return kaf.NTKMEE.with_taylor_errors(fm, cfg.err_degree, eta=cfg.eta, sigma_c=cfg.sigma_c,
                                                 window=cfg.window)
        return kaf.NTKMEESIG(fm, cfg.eta, cfg.sigma_c, cfg.window)
    quantized = algo.startswith("q")
    q = (0.07 if quantized else 0.0) if cfg.q_factor is None else cfg.q_factor
    if algo == "klms":
        return kaf.KLMS(cfg.sigma, cfg.eta, q)
    if algo in ("kmcc", "qkmcc"):
        return kaf.KMCC(cfg.sigma, cfg.eta, cfg.sigma_c, q)
    if algo in ("kmee-sig", "qkmee-sig"):
        return kaf.KMEESIG(cfg.sigma, cfg.eta, cfg.sigma_c, cfg.window, q)
    if algo == "lms":
        return kaf.LMS(cfg.embed_dim, cfg.eta)
    return kaf.LMEESIG(cfg.embed_dim, cfg.eta, cfg.sigma_c, cfg.window)


def _test_mse(filt, X, y) -> float:
    r = filt.predict_batch(X) - y
    return float(np.mean(r * r))


def run_kaf_trial(cfg: KafConfig, X: np.ndarray, y: np.ndarray, trial: int,
                  step_times: bool = False):
    """One trial of the protocol.

    Testing MSE (and the windowed IP of MEE filters, at width
    ``sqrt(2) sigma_c``) is logged at iteration 0, every ``eval_every``
    updates and at the end.  CPU time is thread time spent inside ``step``.
    With ``step_times`` the per-step CPU times are returned as well.
    """
    split = mg_trial_split(X, y, trial, cfg.seed, cfg.n_train, cfg.n_test)
    filt = make_filter(cfg, trial)
    ip_width = SQRT2 * cfg.sigma_c
    has_ip = hasattr(filt, "recent_errors")
    records = []
    per_step = np.empty(cfg.n_train) if step_times else None
    cpu = 0.0

    def log(it):
        size = int(filt.model_size)
        records.append(ExperimentRecord("kaf", cfg.algorithm, trial, it, "testing-MSE",
                                        _test_mse(filt, split.X_test, split.y_test), cpu, size))
        if has_ip and it > 0:
            records.append(ExperimentRecord("kaf", cfg.algorithm, trial, it, "IP",
                                            kaf.windowed_ip(filt.recent_errors(), ip_width), cpu, size))

    log(0)
    for n in range(cfg.n_train):
        t0 = time.thread_time()
        filt.step(split.X_train[n], split.y_train[n])
        dt = time.thread_time() - t0
        cpu += dt
        if step_times:
            per_step[n] = dt
        it = n + 1
        if it % cfg.eval_every == 0 or it == cfg.n_train:
            log(it)
    return (records, per_step) if step_times else records


def average_records(records: list[ExperimentRecord]) -> list[ExperimentRecord]:
    """Mean over trials of matching (experiment, method, iteration, metric) rows."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.experiment, r.method, r.iteration, r.metric), []).append(r)
    out = []
    for (exp, method, it, metric), rows in groups.items():
        out.append(ExperimentRecord(exp, method, -1, it, metric, float(np.mean([r.value for r in rows])),
                                    float(np.mean([r.cpu_seconds for r in rows])),
                                    int(round(np.mean([r.model_size for r in rows])))))
    return out


def run_kaf(cfg: KafConfig, per_trial: bool = False, data=None) -> list[ExperimentRecord]:
    """Run ``cfg.trials`` trials and return trial-averaged records.

    ``per_trial`` returns the raw per-trial rows instead.  Trials run on
    ``cfg.workers`` threads, each with its own filter, seed and timer.
    """
    if cfg.trials == 0:
        return []
    X, y = mg_dataset(cfg) if data is None else data
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(lambda t: run_kaf_trial(cfg, X, y, t), range(cfg.trials)))
    else:
        chunks = [run_kaf_trial(cfg, X, y, t) for t in range(cfg.trials)]
    records = [r for chunk in chunks for r in chunk]
    return records if per_trial else average_records(records)


# ---------------------------------------------------------------------------
# timing benchmark


def mixture_sample(n: int, seed: int = 0) -> np.ndarray:
    """1-D two-component Gaussian mixture scaled into [-1, 1]."""
    rng = np.random.default_rng(seed)
    comp = rng.random(n) < 0.5
    x = np.where(comp, rng.normal(-0.4, 0.15, n), rng.normal(0.4, 0.25, n))
    return x / np.max(np.abs(x))


def run_bench(backends=BACKENDS, sizes=(500, 1000, 2000, 4000), repeats: int = 5,
              sigma: float = DEFAULT_SIGMA, seed: int = 0, spec_overrides: dict | None = None) -> list[dict]:
    """Median and interquartile range of IP CPU time per backend and size."""
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    rows = []
    for name in backends:
        spec = BackendSpec(name=name, sigma=sigma, **(spec_overrides or {}))
        for n in sizes:
            x = mixture_sample(int(n), seed)
            backend = spec.build()
            if name == "eips":
                backend.feature_map(1, SQRT2 * sigma)
            times = []
            for _ in range(repeats):
                t0 = time.process_time()
                value = itl.information_potential(backend, x)
                times.append(time.process_time() - t0)
            q1, med, q3 = np.percentile(times, [25, 50, 75])
            rows.append({"backend": name, "n": int(n), "repeats": repeats, "median_s": float(med),
                         "iqr_s": float(q3 - q1), "value": float(value)})
    return rows


def record_dicts(records) -> list[dict]:
    return [asdict(r) for r in records]
