import hashlib
import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import TABLE_DATASETS, dataset_path, load_table
from eips_itl.data import (Dataset, TimeSeries, embed, load_delimited, mackey_glass, mg_trial_split, normalize,
                           read_series, standardize_series, write_series)
from eips_itl.errors import ConfigError, DataError


class TestLoad:
    @pytest.mark.parametrize("name", ["iris", "wine", "yeast"])
    def test_bundled_shapes(self, name):
        ds = load_table(name)
        assert ds.X.shape == TABLE_DATASETS[name][2]

    def test_iris_has_uci_rows(self):
        ds = load_delimited(dataset_path("iris"))
        np.testing.assert_array_equal(ds.X[34], [4.9, 3.1, 1.5, 0.1])
        np.testing.assert_array_equal(ds.X[37], [4.9, 3.1, 1.5, 0.1])

    def test_label_column_dropped_with_warning(self, tmp_path, caplog):
        p = tmp_path / "t.csv"
        p.write_text("1,2,a\n3,4,b\n")
        ds = load_delimited(p)
        assert ds.X.tolist() == [[1, 2], [3, 4]]
        assert "dropping non-numeric" in caplog.text

    def test_single_column_round_trip(self, tmp_path):
        vals = [0.1, -2.5, 3e-7, 1234.5678]
        p = tmp_path / "one.txt"
        p.write_text("\n".join(repr(v) for v in vals))
        assert load_delimited(p).X[:, 0].tolist() == vals

    def test_whitespace_and_header(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text("a b\n1 2\n3   4\n")
        ds = load_delimited(p, has_header=True)
        assert ds.columns == ["a", "b"] and ds.X.tolist() == [[1, 2], [3, 4]]

    def test_drop_columns(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("9,1,2\n8,3,4\n")
        assert load_delimited(p, drop_columns=[0]).X.tolist() == [[1, 2], [3, 4]]

    def test_bad_value_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2\n3,x\n")
        with pytest.raises(DataError, match=":2:"):
            load_delimited(p)

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "rag.csv"
        p.write_text("1,2\n3\n")
        with pytest.raises(DataError, match=":2:"):
            load_delimited(p)

    def test_empty_and_missing(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("\n\n")
        with pytest.raises(DataError):
            load_delimited(p)
        with pytest.raises(DataError):
            load_delimited(tmp_path / "nope.csv")


class TestNormalize:
    def test_three_points(self):
        out = normalize(Dataset("t", np.array([[1.0], [2.0], [3.0]]), ["a"]))
        np.testing.assert_allclose(out.X[:, 0], [-1, 0, 1], atol=1e-15)

    def test_population_and_sample_sd_agree_after_scaling(self, rng):
        ds = Dataset("t", rng.normal(size=(20, 3)), list("abc"))
        np.testing.assert_allclose(normalize(ds, ddof=0).X, normalize(ds, ddof=1).X, atol=1e-15)

    @pytest.mark.parametrize("scope", ["global", "column"])
    def test_idempotent(self, scope, rng):
        ds = Dataset("t", rng.exponential(size=(50, 4)), list("abcd"))
        once = normalize(ds, scope)
        np.testing.assert_allclose(normalize(once, scope).X, once.X, atol=1e-12)

    def test_column_scope_invariants(self, rng):
        X = normalize(Dataset("t", rng.gamma(2, size=(40, 3)), list("abc")), "column").X
        np.testing.assert_allclose(np.max(np.abs(X), axis=0), 1.0)
        np.testing.assert_allclose(X.mean(axis=0), 0.0, atol=1e-12)

    def test_global_scope_shares_one_scale(self, rng):
        raw = rng.gamma(2, size=(40, 3))
        X = normalize(Dataset("t", raw, list("abc"))).X
        assert np.max(np.abs(X)) == pytest.approx(1.0)
        z = (raw - raw.mean(0)) / raw.std(0)
        np.testing.assert_allclose(X * np.max(np.abs(z)), z, rtol=1e-12)

    def test_constant_column_named(self):
        with pytest.raises(DataError, match="'b'"):
            normalize(Dataset("t", np.array([[1.0, 5.0], [2.0, 5.0]]), ["a", "b"]))

    def test_unknown_scope(self, rng):
        with pytest.raises(ConfigError):
            normalize(Dataset("t", rng.normal(size=(3, 1)), ["a"]), "row")


class TestStandardizeSeries:
    def test_range_and_example(self):
        ts = standardize_series([1.0, 2.0, 3.0])
        np.testing.assert_allclose(ts.values, [-1, 0, 1], atol=1e-15)

    def test_shift_and_scale_invariance(self, rng):
        v = rng.normal(size=30)
        a = standardize_series(v).values
        np.testing.assert_allclose(standardize_series(3 * v + 7).values, a, atol=1e-13)
        np.testing.assert_allclose(standardize_series(a).values, a, atol=1e-13)
        assert np.max(np.abs(a)) == pytest.approx(1.0)

    def test_constant(self):
        with pytest.raises(DataError):
            standardize_series(np.ones(4))


class TestMackeyGlass:
    def test_exponential_decay_without_feedback(self):
        ts = mackey_glass(11, beta=0.0, burn_in=0)
        assert abs(ts.values[10] - 0.9 * math.exp(-0.1 * 60)) < 1e-8
        np.testing.assert_allclose(ts.values, 0.9 * np.exp(-0.1 * 6 * np.arange(11)), atol=1e-8)

    def test_fixed_point_holds(self):
        beta, gamma, n = 0.2, 0.1, 10.0
        xstar = brentq(lambda x: beta / (1 + x**n) - gamma, 0.5, 2.0)
        ts = mackey_glass(100, beta, gamma, n=n, x0=xstar, burn_in=0, dt=0.1)
        assert np.max(np.abs(ts.values - xstar)) < 1e-10

    def test_first_point_is_initial_condition(self):
        assert mackey_glass(3, burn_in=0).values[0] == 0.9

    def test_deterministic_bytes(self):
        assert mackey_glass(500).values.tobytes() == mackey_glass(500).values.tobytes()

    def test_golden_series(self):
        digest = hashlib.sha256(mackey_glass(1000).values.tobytes()).hexdigest()
        assert digest == "1482c2981d3303b781495d18cccefc42409e46631541f8251638f2e8884585fa"

    def test_golden_embedding_of_standardized_series(self):
        X, y = embed(standardize_series(mackey_glass(1000)), 7)
        digest = hashlib.sha256(np.ascontiguousarray(X[:10]).tobytes() + y[:10].tobytes()).hexdigest()
        assert digest == "67e3a068fefddd364925910b8970c0aef952a4e155dab3448b8d5c11fb08e42e"

    def test_second_order_convergence_in_h(self):
        # linear interpolation of the delayed term limits the scheme to O(h^2)
        a, b, c = (mackey_glass(40, burn_in=0, h=h).values for h in (0.1, 0.05, 0.025))
        e1, e2 = np.max(np.abs(a - b)), np.max(np.abs(b - c))
        assert e1 < 2e-5
        assert e1 / e2 == pytest.approx(4.0, rel=0.05)

    @pytest.mark.slow
    def test_bounded_and_aperiodic(self):
        v = mackey_glass(10_000).values
        assert np.all((v > 0) & (v < 1.5))
        assert len(np.unique(v)) == len(v)

    def test_sensitive_to_initial_condition(self):
        a = mackey_glass(2000, burn_in=0).values
        b = mackey_glass(2000, burn_in=0, x0=0.9 + 1e-6).values
        assert np.max(np.abs(a - b)) > 0.1

    def test_rejects_incommensurate_dt(self):
        with pytest.raises(ConfigError, match="multiple"):
            mackey_glass(10, dt=0.25)

    @pytest.mark.parametrize("kw", [dict(n_samples=0), dict(n_samples=5, dt=-1.0)])
    def test_rejects_bad_arguments(self, kw):
        with pytest.raises(ConfigError):
            mackey_glass(**kw)

    def test_write_read_round_trip(self, tmp_path):
        ts = standardize_series(mackey_glass(50))
        path, sidecar = write_series(ts, tmp_path / "mg.csv")
        back = read_series(path)
        np.testing.assert_array_equal(back.values, ts.values)
        assert back.dt == 6.0 and back.params == json.loads(sidecar.read_text())["params"] == ts.params


class TestEmbed:
    def test_small_example(self):
        X, y = embed([1.0, 2.0, 3.0, 4.0], d=2)
        assert X.tolist() == [[1, 2], [2, 3]] and y.tolist() == [3, 4]

    @pytest.mark.parametrize("n,d,h", [(10, 3, 1), (50, 7, 1), (20, 4, 5)])
    def test_row_count(self, n, d, h):
        X, y = embed(np.arange(float(n)), d, h)
        assert X.shape == (n - d - h + 1, d) and y.shape == (n - d - h + 1,)
        assert y[0] == d - 1 + h

    def test_constant_series(self):
        X, y = embed(np.full(12, 0.5), 4)
        assert np.all(X == 0.5) and np.all(y == 0.5)

    def test_too_short(self):
        with pytest.raises(DataError):
            embed([1.0, 2.0], d=2)

    def test_accepts_timeseries(self):
        X, _ = embed(TimeSeries(np.arange(9.0), 1.0), 3)
        assert X[0].tolist() == [0, 1, 2]


class TestTrialSplit:
    def test_contiguous_and_seeded(self):
        X = np.arange(3000.0)[:, None]
        y = np.arange(3000.0)
        s = mg_trial_split(X, y, trial=4, base_seed=10)
        assert s.X_train.shape == (2000, 1) and s.X_test.shape == (200, 1)
        assert s.X_test[0, 0] == s.X_train[-1, 0] + 1
        start = int(np.random.default_rng(14).integers(0, 3000 - 2200 + 1))
        assert s.start == start == s.X_train[0, 0]

    def test_too_short(self):
        with pytest.raises(DataError):
            mg_trial_split(np.zeros((100, 1)), np.zeros(100), 0)
