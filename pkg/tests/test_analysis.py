import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lavreg.analysis import (
    LOG_RATE_NOTE,
    RateTable,
    compare_bound,
    fit_log_rate,
    fit_power_rate,
    rate_table,
)
from lavreg.io import read_csv

DELTAS = np.logspace(-1, -8, 15)


@pytest.mark.parametrize("p", [1.0, 0.5, 1 / 3])
def test_power_rate_exact(p):
    s, b, r2 = fit_power_rate(list(zip(DELTAS, 3 * DELTAS**p)))
    assert s == pytest.approx(p, abs=1e-12)
    assert math.exp(b) == pytest.approx(3, rel=1e-10)
    assert r2 == pytest.approx(1)


@pytest.mark.parametrize("q", [1.0, 2.0])
def test_log_rate_exact(q):
    errors = 2 * np.log(1 / DELTAS) ** (-q)
    Q, K, _ = fit_log_rate(list(zip(DELTAS, errors)))
    assert Q == pytest.approx(q, abs=1e-12)
    assert K == pytest.approx(2, rel=1e-10)
    with pytest.raises(ValueError):
        fit_log_rate([(2.0, 1.0), (0.5, 1.0), (0.1, 0.5)])


def test_noisy_power_rate():
    rng = np.random.default_rng(0)
    errors = DELTAS**0.5 * (1 + 0.01 * rng.standard_normal(DELTAS.size))
    s, _, _ = fit_power_rate(list(zip(DELTAS, errors)))
    assert abs(s - 0.5) <= 0.02


def test_rate_table_sorting_and_floor():
    d = [1e-4, 1e-2, 1e-3, 1e-5]
    e = [1e-4, 1e-2, 1e-3, 1e-20]
    t = rate_table(d, e)
    assert t.drivers == (1e-2, 1e-3, 1e-4, 1e-5)
    assert t.n_points == 3
    assert t.fitted_slope == pytest.approx(1)
    with pytest.raises(ValueError):
        rate_table([1e-2, 1e-3], [1e-2, 1e-3])
    with pytest.raises(ValueError):
        RateTable((1e-3, 1e-2), (1, 1), 1, 0, "power", 1, (1e-3, 1e-2), 2)


@settings(max_examples=30)
@given(p=st.floats(0.2, 1.0), q=st.floats(0.5, 2.0))
def test_auto_regime_selection(p, q):
    d = np.logspace(-2, -12, 21)
    assert rate_table(d, d**p, "auto").regime == "power"
    assert rate_table(d, np.log(1 / d) ** (-q), "auto").regime == "logarithmic"


def test_rate_table_io(tmp_path):
    t = rate_table(DELTAS, np.log(1 / DELTAS) ** -1.0, "logarithmic")
    csv_path, json_path = t.write(tmp_path / "rate")
    header, data = read_csv(csv_path)
    assert header == ["delta", "error"]
    assert np.array_equal(data[:, 0], np.asarray(t.drivers))
    d = t.to_dict()
    assert d["note"] == LOG_RATE_NOTE and d["slope_or_q"] == pytest.approx(1.0)


def test_compare_bound():
    obs = [(1e-2, 0.5), (1e-3, 0.25)]
    assert compare_bound(obs, [(1e-2, 1.0), (1e-3, 0.5)]).max_ratio == pytest.approx(0.5)
    assert compare_bound(obs, [(1e-2, 0.5), (1e-3, 0.25)]).passed
    r = compare_bound(obs, [(1e-2, 0.4), (1e-3, 0.25)])
    assert not r.passed and r.max_ratio == pytest.approx(1.25)
    assert compare_bound(obs, [(1e-2, 0.0), (1e-3, 0.0)], slack=1.0).passed
    assert compare_bound([(1.0, 0.0)], [(1.0, 0.0)]).max_ratio == 0.0
    with pytest.raises(ValueError):
        compare_bound(obs, [(1e-2, 1.0), (2e-3, 1.0)])
    with pytest.raises(ValueError):
        compare_bound(obs, [(1e-2, 1.0)])
