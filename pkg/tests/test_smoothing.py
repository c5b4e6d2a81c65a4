import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from argosc.data import TimeSeriesDataset
from argosc.smoothing import (SGParams, central_difference, gcv_window, sg_filter,
                              smooth_and_differentiate)

from oracles import sg_local_fit

# GCV minimiser and score for the signal below, from the explicit local-fit oracle
GCV_SIGNAL_BEST = 15
GCV_SIGNAL_SCORE = 0.0004561257475898084


def _gcv_signal():
    rng = np.random.default_rng(12345)
    t = np.arange(250) * 0.01
    return np.sin(2 * np.pi * 4 * t) + 0.3 * np.cos(17 * t) + 0.02 * rng.standard_normal(250)


def test_quadratic_derivative_example():
    t = np.linspace(0, 2, 201)
    y = 3 * t ** 2 - t
    d = sg_filter(y, t[1] - t[0], SGParams(11, 3, "fixed"), deriv=1)
    np.testing.assert_allclose(d[5:-5], (6 * t - 1)[5:-5], atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(coef=st.lists(st.floats(-5, 5), min_size=1, max_size=5),
       half=st.integers(3, 12), dt=st.floats(1e-3, 0.5))
def test_polynomial_reproduction(coef, half, dt):
    window = 2 * half + 1
    t = np.arange(80) * dt
    y = np.polynomial.polynomial.polyval(t, coef)
    dy = np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(coef)) if len(coef) > 1 \
        else np.zeros_like(t)
    p = SGParams(window, 4, "fixed")
    s, d = sg_filter(y, dt, p, 0), sg_filter(y, dt, p, 1)
    inner = slice(half, -half)
    scale = max(1.0, np.max(np.abs(y)))
    np.testing.assert_allclose(s[inner], y[inner], rtol=1e-8, atol=1e-8 * scale)
    dscale = max(1.0, np.max(np.abs(dy)))
    np.testing.assert_allclose(d[inner], dy[inner], rtol=1e-8, atol=1e-8 * dscale)


def test_matches_local_fit_oracle_including_edges():
    rng = np.random.default_rng(0)
    y = np.cumsum(rng.standard_normal(60))
    for deriv in (0, 1):
        got = sg_filter(y, 0.05, SGParams(9, 4, "fixed"), deriv)
        np.testing.assert_allclose(got, sg_local_fit(y, 0.05, 9, 4, deriv), rtol=1e-9, atol=1e-9)


def test_gcv_selects_oracle_window():
    y = _gcv_signal()
    best, windows, scores = gcv_window(y, 4)
    assert best == GCV_SIGNAL_BEST
    assert windows[0] == 7 and windows[-1] == 25
    assert np.all(windows % 2 == 1)
    assert scores[list(windows).index(15)] == pytest.approx(GCV_SIGNAL_SCORE, rel=1e-9)


def test_gcv_window_cap():
    y = np.random.default_rng(1).standard_normal(20000)
    _, windows, _ = gcv_window(y)
    assert windows[-1] == 501


def test_params_validation():
    with pytest.raises(ValueError, match="odd"):
        SGParams(10, 4, "fixed")
    with pytest.raises(ValueError):
        SGParams(5, 4, "fixed")
    with pytest.raises(ValueError):
        SGParams(0, 4, "sometimes")
    with pytest.raises(ValueError, match="exceeds"):
        sg_filter(np.ones(5), 1.0, SGParams(7, 4, "fixed"))
    with pytest.raises(ValueError, match="non-finite"):
        sg_filter(np.array([1.0, np.inf, 1, 1, 1, 1, 1]), 1.0, SGParams(7, 4, "fixed"))


def _ds(n, fn=np.sin):
    t = np.arange(n) * 0.01
    X = np.column_stack([fn(t), np.cos(t)])
    return TimeSeriesDataset(t, X, np.column_stack([t]))


def test_smooth_and_differentiate_fixed():
    ds = _ds(300)
    out = smooth_and_differentiate(ds, SGParams(21, 4, "fixed"))
    # sin is not a polynomial: the residual is the order-4 truncation error (~2e-7 here)
    np.testing.assert_allclose(out.Xdot[10:-10, 0], np.cos(ds.t)[10:-10], atol=1e-6)
    np.testing.assert_allclose(out.Xdot[10:-10, 1], -np.sin(ds.t)[10:-10], atol=1e-6)
    assert [p.window for p in out.params_used] == [21, 21]


def test_smooth_and_differentiate_auto_per_column():
    rng = np.random.default_rng(3)
    t = np.arange(2000) * 0.01
    X = np.column_stack([np.sin(t) + 0.2 * rng.standard_normal(2000), np.sin(t)])
    out = smooth_and_differentiate(TimeSeriesDataset(t, X, np.zeros((2000, 1))))
    w_noisy, w_clean = (p.window for p in out.params_used)
    assert w_noisy > w_clean
    assert all(p.selection == "fixed" for p in out.params_used)


def test_errors_for_short_series():
    with pytest.raises(ValueError):
        smooth_and_differentiate(_ds(20))
    with pytest.raises(ValueError):
        smooth_and_differentiate(_ds(10), SGParams(11, 4, "fixed"))


def test_central_difference():
    t = np.linspace(0, 1, 11)
    d = central_difference(np.column_stack([t ** 2]), 0.1)
    np.testing.assert_allclose(d[:, 0], 2 * t, atol=1e-12)


def test_constant_signal():
    y = np.full(50, 2.5)
    p = SGParams(11, 4, "fixed")
    np.testing.assert_allclose(sg_filter(y, 0.1, p, 0), y, rtol=1e-13)
    np.testing.assert_allclose(sg_filter(y, 0.1, p, 1), 0.0, atol=1e-12)


def test_noiseless_lotka_volterra_derivative():
    from argosc.simulate import BenchmarkConfig, integrate, lotka_volterra
    ds = integrate(BenchmarkConfig(lotka_volterra()))
    X, U = ds.truth, ds.U
    rhs = np.column_stack([8 * X[:, 0] - X[:, 0] * X[:, 1] + U[:, 0], -4 * X[:, 1] + X[:, 0] * X[:, 1]])
    out = smooth_and_differentiate(ds)
    rel = np.sqrt(np.mean((out.Xdot - rhs) ** 2, axis=0) / np.mean(rhs ** 2, axis=0))
    assert np.all(rel <= 1e-3)
    np.testing.assert_array_equal(out.X_s.shape, X.shape)


def test_auto_selection_reduces_pure_noise():
    rng = np.random.default_rng(21)
    t = np.arange(3000) * 0.01
    X = rng.standard_normal((3000, 1))
    out = smooth_and_differentiate(TimeSeriesDataset(t, X, np.zeros((3000, 1))))
    assert np.sqrt(np.mean(out.X_s ** 2)) < 0.5 * np.sqrt(np.mean(X ** 2))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 1000))
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    y1, y2 = rng.standard_normal((2, 80))
    p = SGParams(15, 4, "fixed")
    for deriv in (0, 1):
        lhs = sg_filter(a * y1 + b * y2, 0.1, p, deriv)
        rhs = a * sg_filter(y1, 0.1, p, deriv) + b * sg_filter(y2, 0.1, p, deriv)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)) * 50)


def test_shift_equivariance_interior():
    y = np.random.default_rng(4).standard_normal(120)
    p = SGParams(11, 4, "fixed")
    a = sg_filter(y, 1.0, p, 1)
    b = sg_filter(y[7:], 1.0, p, 1)
    np.testing.assert_allclose(a[12:-5], b[5:-5], atol=1e-12)
