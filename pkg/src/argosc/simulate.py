"""Benchmark systems, forcing laws and fixed-step RK4 trajectory generation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import DatasetError, TimeSeriesDataset

__all__ = [
    "ForcingLaw",
    "System",
    "BenchmarkConfig",
    "SimulationError",
    "van_der_pol",
    "lotka_volterra",
    "lorenz",
    "make_system",
    "rk4",
    "integrate",
    "add_noise",
    "split",
]


class SimulationError(RuntimeError):
    pass


FORCING_KINDS = ("pi_feedback", "sinusoid", "cos_cubed", "zero", "custom")


@dataclass(frozen=True)
class ForcingLaw:
    """Input law ``u(t, x)``.

    ``pi_feedback`` depends on the state only (``u = -k_p x1 - k_i x2``);
    ``sinusoid`` (``k_u sin t``) and ``cos_cubed`` (``k_u cos(t)**3``) on time only.
    ``custom`` wraps an arbitrary callable ``func(t, x) -> (r,)``.
    """

    kind: str = "zero"
    params: Mapping[str, float] = field(default_factory=dict)
    func: Callable | None = field(default=None, compare=False)
    n_inputs: int = 1

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        required = {"pi_feedback": ("k_p", "k_i"), "sinusoid": ("k_u",), "cos_cubed": ("k_u",)}
        for name in required.get(self.kind, ()):
            if name not in self.params:
                raise ValueError(f"forcing {self.kind} needs parameter {name!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom forcing needs func")
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})

    @property
    def state_dependent(self) -> bool:
        return self.kind in ("pi_feedback", "custom")

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        p = self.params
        if self.kind == "pi_feedback":
            return np.array([-p["k_p"] * x[0] - p["k_i"] * x[1]])
        if self.kind == "sinusoid":
            return np.array([p["k_u"] * math.sin(t)])
        if self.kind == "cos_cubed":
            return np.array([p["k_u"] * math.cos(t) ** 3])
        if self.kind == "zero":
            return np.zeros(self.n_inputs)
        return np.atleast_1d(np.asarray(self.func(t, x), dtype=np.float64))

    def samples(self, t: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Input values on a sampled trajectory, shape (n, r)."""
        t = np.asarray(t)
        p = self.params
        if self.kind == "pi_feedback":
            return (-p["k_p"] * X[:, 0] - p["k_i"] * X[:, 1])[:, None]
        if self.kind == "sinusoid":
            return (p["k_u"] * np.sin(t))[:, None]
        if self.kind == "cos_cubed":
            return (p["k_u"] * np.cos(t) ** 3)[:, None]
        return np.array([self(ti, xi) for ti, xi in zip(t, X)]).reshape(len(t), -1)

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True)
class System:
    """Forced ODE ``dx/dt = f(x, u)``."""

    name: str
    params: Mapping[str, float]
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(compare=False)
    n_states: int
    default_x0: tuple[float, ...]
    default_forcing: ForcingLaw = field(default_factory=ForcingLaw)

    def __call__(self, x, u):
        return self.rhs(x, u)


def van_der_pol(mu: float = 1.2) -> System:
    def f(x, u):
        return np.array([x[1], mu * (1.0 - x[0] ** 2) * x[1] - x[0] + u[0]])
    return System("van_der_pol", {"mu": mu}, f, 2, (2.0, 0.0),
                  ForcingLaw("pi_feedback", {"k_p": 1.0, "k_i": 1.0}))


def lotka_volterra(a: float = 8.0, b: float = 1.0, c: float = 4.0, d: float = 1.0) -> System:
    def f(x, u):
        return np.array([x[0] * (a - b * x[1]) + u[0], -x[1] * (c - d * x[0])])
    return System("lotka_volterra", {"a": a, "b": b, "c": c, "d": d}, f, 2, (4.0, 2.0),
                  ForcingLaw("sinusoid", {"k_u": 1.0}))


def lorenz(sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0) -> System:
    def f(x, u):
        return np.array([
            sigma * (x[1] - x[0]) + u[0],
            x[0] * (rho - x[2]) - x[1],
            x[0] * x[1] - beta * x[2],
        ])
    return System("lorenz", {"sigma": sigma, "rho": rho, "beta": beta}, f, 3, (-8.0, 7.0, 27.0),
                  ForcingLaw("cos_cubed", {"k_u": 1.0}))


_SYSTEMS = {"van_der_pol": van_der_pol, "lotka_volterra": lotka_volterra, "lorenz": lorenz}


def make_system(name: str, **params) -> System:
    try:
        factory = _SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(_SYSTEMS)}") from None
    return factory(**params)


@dataclass(frozen=True)
class BenchmarkConfig:
    """Everything needed to regenerate one experiment's data."""

    system: System
    forcing: ForcingLaw | None = None
    x0: Sequence[float] | None = None
    t_end: float = 30.0
    dt: float = 0.001
    snr_db: float | None = None
    seed: int = 0
    train_seconds: float = 10.0

    def __post_init__(self):
        if self.forcing is None:
            object.__setattr__(self, "forcing", self.system.default_forcing)
        x0 = self.system.default_x0 if self.x0 is None else self.x0
        x0 = tuple(float(v) for v in x0)
        if len(x0) != self.system.n_states:
            raise ValueError(f"x0 has {len(x0)} entries, system has {self.system.n_states} states")
        object.__setattr__(self, "x0", x0)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not (self.t_end > self.train_seconds > 0):
            raise ValueError("need t_end > train_seconds > 0")
        if self.snr_db is not None and math.isnan(self.snr_db):
            raise ValueError("snr_db must not be NaN")

    @property
    def n_samples(self) -> int:
        return int(round(self.t_end / self.dt)) + 1

    def meta(self) -> dict:
        return {
            "system": self.system.name,
            "parameters": dict(self.system.params),
            "forcing": self.forcing.describe(),
            "x0": list(self.x0),
            "dt": self.dt,
            "t_end": self.t_end,
            "snr_db": self.snr_db,
            "seed": self.seed,
            "train_seconds": self.train_seconds,
        }


def rk4(f: Callable[[float, np.ndarray], np.ndarray], x0, t: np.ndarray,
        bound: float | None = None):
    """Classical fixed-step Runge-Kutta on the grid `t`.

    Returns ``(X, stop)`` where ``stop`` is the index of the first sample that
    is non-finite or exceeds `bound` in magnitude (``None`` if the run completed).
    Rows from ``stop`` on are NaN.
    """
    t = np.asarray(t, dtype=np.float64)
    n = t.shape[0]
    x = np.array(x0, dtype=np.float64)
    X = np.full((n, x.shape[0]), np.nan)
    X[0] = x
    for i in range(n - 1):
        h = t[i + 1] - t[i]
        ti = t[i]
        k1 = f(ti, x)
        k2 = f(ti + 0.5 * h, x + 0.5 * h * k1)
        k3 = f(ti + 0.5 * h, x + 0.5 * h * k2)
        k4 = f(ti + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or (bound is not None and np.max(np.abs(x)) > bound):
            return X, i + 1
        X[i + 1] = x
    return X, None


def integrate(config: BenchmarkConfig) -> TimeSeriesDataset:
    """Noise-free trajectory of the configured system on ``t = 0, dt, ..., t_end``.

    ``truth`` and ``X`` are both the noise-free states; inputs are recorded at
    the sample times (feedback inputs are evaluated on the true state).
    """
    system, law = config.system, config.forcing
    t = np.arange(config.n_samples) * config.dt

    def f(ti, x):
        return system(x, law(ti, x))

    X, stop = rk4(f, config.x0, t)
    if stop is not None:
        raise SimulationError(f"non-finite state at t={t[stop]:.6g}")
    U = law.samples(t, X)
    return TimeSeriesDataset(t=t, X=X, U=U, truth=X, meta=config.meta())


def add_noise(ds: TimeSeriesDataset, snr_db: float, seed: int) -> TimeSeriesDataset:
    """Additive Gaussian measurement noise on every state column.

    Column ``j`` gets variance ``mean(truth[:, j]**2) / 10**(snr_db/10)``, drawn
    from its own stream spawned from `seed`. Inputs are left clean.
    """
    if ds.truth is None:
        raise DatasetError("add_noise needs the noise-free truth")
    snr_db = float(snr_db)
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ValueError("snr_db must be finite or +inf")
    meta = dict(ds.meta, snr_db=snr_db, noise_seed=int(seed))
    if snr_db == math.inf:
        return ds.replace(X=ds.truth, meta=meta)
    streams = np.random.SeedSequence(int(seed)).spawn(ds.m)
    X = np.empty_like(ds.truth)
    for j, ss in enumerate(streams):
        col = ds.truth[:, j]
        sd = math.sqrt(np.mean(col ** 2) / 10.0 ** (snr_db / 10.0))
        X[:, j] = col + sd * np.random.default_rng(ss).standard_normal(ds.n)
    return ds.replace(X=X, meta=meta)


def split(ds: TimeSeriesDataset, train_seconds: float):
    """Split into training samples (``t - t0 < train_seconds``) and the remainder.

    The validation part starts exactly at the boundary sample, so 30 s sampled at
    1 ms with a 10 s split yields 10,000 training and 20,001 validation samples.
    """
    t0 = ds.t[0]
    span = ds.t[-1] - t0
    if not (0 < train_seconds < span):
        raise ValueError(f"train_seconds must lie in (0, {span:g})")
    cut = int(np.searchsorted(ds.t - t0, train_seconds - 1e-9 * ds.dt, side="left"))
    if cut < 2 or ds.n - cut < 2:
        raise ValueError("split leaves fewer than 2 samples on one side")
    return ds.rows(slice(0, cut)), ds.rows(slice(cut, None))
