import numpy as np
import pytest

from gatedpinn.csvio import read_csv
from gatedpinn.metrics import (
    REPORT_COLUMNS, SliceErrorReport, err_infinity, err_relative_norm, time_series_report,
)
from gatedpinn.models import OracleModel
from gatedpinn.qho import QhoConfig, analytic_psi

CFG = QhoConfig()


def test_err_infinity_trivial_table():
    rng = np.random.default_rng(0)
    # multiples of 1/8 keep the offset arithmetic exact
    f = rng.integers(-16, 16, 50) / 8 + 1j * rng.integers(-16, 16, 50) / 8
    assert err_infinity(f, f, "real") == 0.0
    assert err_infinity(f, f, "imag") == 0.0
    assert err_infinity(f + 0.5, f, "real") == 0.5
    assert err_infinity(f + 0.5, f, "imag") == 0.0


def test_err_infinity_is_a_seminorm():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 30))
    assert err_infinity(a, b) == err_infinity(b, a)
    assert err_infinity(3 * a, 3 * b) == pytest.approx(3 * err_infinity(a, b))
    assert err_infinity(a, a.copy()) == 0.0


def test_err_infinity_rejects_mismatched_counts():
    with pytest.raises(ValueError):
        err_infinity(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        err_infinity(np.zeros(3), np.zeros(3), "phase")


def test_err_relative_norm_trivial_table():
    w = np.full(4, 0.25)
    assert err_relative_norm(np.ones(4), np.zeros(4), w) == 0.0
    assert err_relative_norm(np.full(4, np.sqrt(2)), np.zeros(4), w) == pytest.approx(100.0)
    assert err_relative_norm(np.zeros(4), np.ones(4), w) == 0.0


def test_err_relative_norm_monte_carlo_of_oracle():
    n = 40_000
    rng = np.random.default_rng(2)
    xy = rng.uniform(-5, 5, (n, 2))
    s = analytic_psi(CFG, xy[:, 0], xy[:, 1], 0.4)
    assert err_relative_norm(s.u, s.v, CFG.area / n) < 0.5


def test_oracle_report_is_zero(tmp_path):
    rep = time_series_report(OracleModel(CFG), CFG, n_grid=64, n_slices=5)
    assert np.all(rep.err_inf_real == 0.0) and np.all(rep.err_inf_imag == 0.0)
    # only the truncation of the tails outside [-5, 5]^2 remains
    assert np.all(rep.err_rel_pct < 1e-6)


def test_report_csv_aggregates_recompute(tmp_path):
    rep = SliceErrorReport([0.0, 1.0, 2.0], [0.1, 0.3, 0.2], [0.05, 0.07, 0.06], [1.0, 2.0, 4.0])
    path = rep.to_csv(tmp_path / "r.csv")
    header, rows = read_csv(path)
    assert header == list(REPORT_COLUMNS)
    per = np.array([[float(v) for v in r[1:]] for r in rows if not r[0].startswith("aggregate")])
    agg = {r[0]: np.array([float(v) for v in r[1:]]) for r in rows if r[0].startswith("aggregate")}
    assert np.array_equal(agg["aggregate_mean"], per.mean(axis=0))
    assert np.array_equal(agg["aggregate_std"], per.std(axis=0))
    assert np.array_equal(agg["aggregate_min"], per.min(axis=0))
    assert np.array_equal(agg["aggregate_max"], per.max(axis=0))
    assert np.all(agg["aggregate_min"] <= agg["aggregate_mean"])
    assert np.all(agg["aggregate_mean"] <= agg["aggregate_max"])


def test_csv_floats_round_trip(tmp_path):
    vals = [0.1, 1 / 3, 1e-300, 2.0**-1074, 123456789.123456789]
    rep = SliceErrorReport(vals, vals, vals, vals)
    _, rows = read_csv(rep.to_csv(tmp_path / "f.csv"))
    assert [float(r[1]) for r in rows[: len(vals)]] == vals
