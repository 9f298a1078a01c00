import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sdrforge.errors import EmptyGroup, EmptySamples
from sdrforge.metrics import EvalResult
from sdrforge.stats import aggregate_runs, format_table, mean_ci, t_quantile

samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=12)


def _t_cdf_by_quadrature(t, dof):
    norm = math.gamma((dof + 1) / 2) / (math.sqrt(dof * math.pi) * math.gamma(dof / 2))
    area, _ = integrate.quad(lambda x: norm * (1 + x * x / dof) ** (-(dof + 1) / 2), 0, t, epsabs=1e-13)
    return 0.5 + area


@pytest.mark.parametrize("dof", range(1, 31))
def test_t_quantile_against_quadrature(dof):
    for p in (0.9, 0.95, 0.975, 0.995):
        assert _t_cdf_by_quadrature(t_quantile(p, dof), dof) == pytest.approx(p, abs=1e-4)
    assert t_quantile(0.025, dof) == pytest.approx(-t_quantile(0.975, dof))


def test_known_quantiles():
    assert t_quantile(0.975, 7) == pytest.approx(2.364624, abs=1e-6)
    assert t_quantile(0.975, 1) == pytest.approx(12.706205, abs=1e-6)


def test_equal_samples():
    s = mean_ci([0.5] * 8)
    assert s.mean == 0.5 and s.ci_half_width == 0.0


def test_fixture_0_2956():
    s = mean_ci([1, 1, 1, 1, 1, 1, 1, 2])
    assert s.mean == 1.125
    assert s.ci_half_width == pytest.approx(0.2956, abs=1e-3)


def test_single_and_empty():
    s = mean_ci([0.7])
    assert s.mean == 0.7 and s.ci_half_width is None
    with pytest.raises(EmptySamples):
        mean_ci([])


@settings(max_examples=200)
@given(samples, st.floats(-50, 50))
def test_shift_equivariance(xs, c):
    a, b = mean_ci(xs), mean_ci([x + c for x in xs])
    assert b.mean == pytest.approx(a.mean + c, abs=1e-9)
    assert b.ci_half_width == pytest.approx(a.ci_half_width, rel=1e-9, abs=1e-9)


def test_equivariance_exact():
    xs = [0.25, 0.5, 0.75, 1.0, 0.125, 0.375, 0.625, 0.875]
    a = mean_ci(xs)
    b = mean_ci([x + 4.0 for x in xs])
    c = mean_ci([x * 2.0 for x in xs])
    assert abs(b.mean - (a.mean + 4.0)) <= 1e-12 and abs(b.ci_half_width - a.ci_half_width) <= 1e-12
    assert abs(c.mean - 2 * a.mean) <= 1e-12 and abs(c.ci_half_width - 2 * a.ci_half_width) <= 1e-12


@settings(max_examples=200)
@given(samples, st.floats(0.01, 100))
def test_scale_equivariance(xs, k):
    a, b = mean_ci(xs), mean_ci([x * k for x in xs])
    assert b.mean == pytest.approx(a.mean * k, rel=1e-9, abs=1e-9)
    assert b.ci_half_width == pytest.approx(a.ci_half_width * k, rel=1e-9, abs=1e-9)


def _result(v, ap_l=None):
    return EvalResult(v, v, v, v, v, ap_l, v, v, v, None)


def test_aggregate_identical_runs():
    table = aggregate_runs({"B=20": [_result(0.4)] * 8})
    row = table["B=20"]
    assert all(st is None or st.ci_half_width == 0.0 for st in row.values())
    assert row["ap_l"] is None and row["ar_l"] is None
    assert row["ap"].n == 8


def test_aggregate_partially_undefined():
    row = aggregate_runs({"g": [_result(0.1, 0.5), _result(0.2, None), _result(0.3, 0.7)]})["g"]
    assert row["ap_l"].n == 2 and row["ap_l"].n_undefined == 1


def test_aggregate_layout():
    table = aggregate_runs({"B=20": [_result(0.5), _result(0.6)], "B=40": [_result(0.3), _result(0.35)]})
    text = format_table(table).splitlines()
    assert text[0].split() == ["metric", "B=20", "B=40"]
    assert [line.split()[0] for line in text[1:]] == EvalResult.metric_names()
    assert "±" in text[1]
    assert text[-1].split()[1:] == ["-", "-"]


def test_empty_group():
    with pytest.raises(EmptyGroup):
        aggregate_runs({"g": []})
