import logging
import os
from pathlib import Path

import numpy as np
import pytest

from eips_itl.data import load_delimited, normalize

DATA_DIR = Path(__file__).parent / "data"

# file name, columns to drop (numeric class/id columns), expected raw shape
TABLE_DATASETS = {
    "iris": ("iris.data", (), (150, 4)),
    "wine": ("wine.data", (0,), (178, 13)),
    "cancer": ("wpbc.data", (0,), (198, 32)),
    "yeast": ("yeast1.dat", (), (1484, 8)),
    "abalone": ("abalone.data", (0,), (4177, 8)),
}


def dataset_path(name: str) -> Path | None:
    """Look for a benchmark file in tests/data, then in ``$EIPS_ITL_DATA_DIR``."""
    fname = TABLE_DATASETS[name][0]
    for root in (DATA_DIR, os.environ.get("EIPS_ITL_DATA_DIR")):
        if root and (Path(root) / fname).exists():
            return Path(root) / fname
    return None


def load_table(name: str, scope: str = "global"):
    path = dataset_path(name)
    if path is None:
        return None
    fname, drop, _ = TABLE_DATASETS[name]
    logging.getLogger("eips_itl.data").disabled = True
    try:
        ds = load_delimited(path, drop_columns=drop, name=name)
    finally:
        logging.getLogger("eips_itl.data").disabled = False
    return normalize(ds, scope)


@pytest.fixture(scope="session")
def iris():
    return load_table("iris")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criterion (one summary line each)")


def pytest_terminal_summary(terminalreporter):
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" not in props or rep.when not in ("call", "setup"):
                continue
            n, title = props["criterion"]
            ok = rep.passed and results.get(n, (True,))[0]
            results[n] = (ok, title)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, title = results[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}  {title}")
