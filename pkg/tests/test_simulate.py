import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from argosc.data import DatasetError, TimeSeriesDataset
from argosc.simulate import (BenchmarkConfig, ForcingLaw, SimulationError, System, add_noise,
                             integrate, lorenz, lotka_volterra, make_system, rk4, split, van_der_pol)

from oracles import rk4_scalar


def _system(rhs, n=1, x0=(1.0,)):
    return System("custom", {}, rhs, n, x0, ForcingLaw("zero"))


def test_constant_trajectory():
    ds = integrate(BenchmarkConfig(_system(lambda x, u: np.zeros(1)), t_end=2.0, dt=0.01,
                                   train_seconds=1.0))
    assert np.all(ds.X == 1.0)


def test_exponential_matches_closed_form():
    t = np.arange(1001) * 0.001
    X, stop = rk4(lambda ti, x: x, [1.0], t)
    assert stop is None
    assert abs(X[-1, 0] - math.e) < 1e-10
    # independent scalar stepper gives the same arithmetic
    assert X[-1, 0] == pytest.approx(rk4_scalar(lambda ti, x: x, 1.0, 0.001, 1000), rel=1e-13)


def _lorenz_endpoint(dt, t_end=1.0):
    s, law = lorenz(), ForcingLaw("cos_cubed", {"k_u": 1.0})
    t = np.linspace(0.0, t_end, int(round(t_end / dt)) + 1)
    X, _ = rk4(lambda ti, x: s(x, law(ti, x)), [-8.0, 7.0, 27.0], t)
    return X[-1]


def test_lorenz_richardson_order():
    a, b, c = (_lorenz_endpoint(dt) for dt in (0.004, 0.002, 0.001))
    ratio = np.linalg.norm(a - b) / np.linalg.norm(b - c)
    assert 12 <= ratio <= 20


def test_rk4_order_on_smooth_system():
    # x' = -x + sin t has a closed form; error ratio under halving approaches 16
    # (t = 5 avoids endpoints where the leading error constant happens to vanish)
    exact = lambda t: 1.5 * math.exp(-t) + 0.5 * (math.sin(t) - math.cos(t))
    errs = []
    for dt in (0.1, 0.05):
        t = np.linspace(0, 5, int(round(5 / dt)) + 1)
        X, _ = rk4(lambda ti, x: -x + math.sin(ti), [1.0], t)
        errs.append(abs(X[-1, 0] - exact(5.0)))
    assert 12 <= errs[0] / errs[1] <= 20


def test_rk4_reports_blowup():
    t = np.linspace(0, 2, 2001)
    X, stop = rk4(lambda ti, x: x * x, [1.0], t, bound=1e6)
    assert stop is not None and 0.99 < t[stop] < 1.01
    assert np.isnan(X[stop:]).all()


@pytest.mark.filterwarnings("ignore:overflow")
def test_integrate_raises_on_divergence():
    cfg = BenchmarkConfig(_system(lambda x, u: x * x), t_end=2.0, dt=0.01, train_seconds=1.0)
    with pytest.raises(SimulationError, match="t="):
        integrate(cfg)


def test_benchmark_grid_and_split():
    ds = integrate(BenchmarkConfig(lorenz()))
    assert ds.n == 30001 and ds.m == 3 and ds.r == 1
    train, val = split(ds, 10.0)
    assert train.n == 10000 and val.n == 20001
    assert val.t[0] == pytest.approx(10.0)
    assert train.meta == ds.meta


def test_small_split():
    ds = TimeSeriesDataset(np.arange(4.0), np.zeros((4, 1)), np.zeros((4, 1)))
    a, b = split(ds, 1.5)
    assert (a.n, b.n) == (2, 2)
    with pytest.raises(ValueError):
        split(ds, 3.0)


def test_pi_feedback_recorded_exactly():
    ds = integrate(BenchmarkConfig(van_der_pol(), t_end=2.0, train_seconds=1.0))
    np.testing.assert_array_equal(ds.U[:, 0], -1.0 * ds.truth[:, 0] - 1.0 * ds.truth[:, 1])


def test_forcing_laws():
    assert ForcingLaw("sinusoid", {"k_u": 2.0})(0.5, None)[0] == 2.0 * math.sin(0.5)
    assert ForcingLaw("cos_cubed", {"k_u": 1.0})(0.3, None)[0] == math.cos(0.3) ** 3
    assert ForcingLaw("pi_feedback", {"k_p": 1.0, "k_i": 2.0})(0.0, np.array([1.0, 3.0]))[0] == -7.0
    with pytest.raises(ValueError):
        ForcingLaw("pi_feedback", {"k_p": 1.0})
    with pytest.raises(ValueError):
        ForcingLaw("square")


def test_benchmark_config_validation():
    with pytest.raises(ValueError):
        BenchmarkConfig(lorenz(), dt=-0.001)
    with pytest.raises(ValueError):
        BenchmarkConfig(lorenz(), x0=(1.0, 2.0))
    with pytest.raises(ValueError):
        BenchmarkConfig(lorenz(), t_end=5.0, train_seconds=10.0)
    with pytest.raises(ValueError):
        make_system("duffing")


def test_default_parameters():
    assert van_der_pol().params == {"mu": 1.2}
    assert lotka_volterra().params == {"a": 8.0, "b": 1.0, "c": 4.0, "d": 1.0}
    assert lorenz().params["beta"] == pytest.approx(8 / 3)


def _const_ds(c=3.0, n=10000):
    t = np.arange(n) * 0.001
    X = np.full((n, 2), c)
    return TimeSeriesDataset(t, X, np.zeros((n, 1)), X)


def test_noise_variance_constant_column():
    noisy = add_noise(_const_ds(), 20.0, seed=7)
    var = np.var(noisy.X - noisy.truth, axis=0)
    np.testing.assert_allclose(var, 9.0 / 100.0, rtol=0.05)


def test_noise_deterministic_and_per_column():
    ds = _const_ds()
    a, b = add_noise(ds, 10.0, 3), add_noise(ds, 10.0, 3)
    np.testing.assert_array_equal(a.X, b.X)
    assert not np.array_equal(a.X[:, 0], a.X[:, 1])
    assert not np.array_equal(add_noise(ds, 10.0, 4).X, a.X)


def test_noise_passthrough_and_errors():
    ds = _const_ds()
    np.testing.assert_array_equal(add_noise(ds, math.inf, 1).X, ds.truth)
    with pytest.raises(ValueError):
        add_noise(ds, math.nan, 1)
    with pytest.raises(DatasetError):
        add_noise(ds.replace(truth=None), 10.0, 1)


@settings(max_examples=15, deadline=None)
@given(snr=st.floats(0.0, 60.0), seed=st.integers(0, 2**63 - 1))
def test_noise_hits_target_snr(snr, seed):
    ds = integrate(BenchmarkConfig(lotka_volterra(), t_end=10.0, train_seconds=5.0))
    noisy = add_noise(ds, snr, seed)
    eps = noisy.X - noisy.truth
    achieved = 10 * np.log10(np.sum(noisy.truth ** 2, axis=0) / np.sum(eps ** 2, axis=0))
    np.testing.assert_allclose(10 ** (achieved / 10), 10 ** (snr / 10), rtol=0.05)
    np.testing.assert_array_equal(noisy.truth, ds.truth)
    np.testing.assert_array_equal(noisy.U, ds.U)
