"""Forward simulation of identified models, validation metrics and result tables."""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import SparseModel, TimeSeriesDataset
from .pipeline import PipelineConfig, fit_argosc
from .simulate import BenchmarkConfig, ForcingLaw, add_noise, integrate, rk4, split
from .sindyc import THRESHOLD_GRID, StlsConfig, fit_sindyc

__all__ = [
    "BLOWUP",
    "EvalReport",
    "MethodResult",
    "BenchmarkResult",
    "simulate_model",
    "score",
    "validate",
    "tune_sindyc",
    "run_benchmark",
    "TABLE_COLUMNS",
    "table_rows",
    "write_table",
    "write_trajectories",
]

log = logging.getLogger(__name__)

BLOWUP = 1e6
METHODS = ("argosc", "argos", "sindyc")


@dataclass(frozen=True)
class EvalReport:
    """Per-state validation metrics against the noise-free truth.

    With a divergent prediction the metrics cover the samples before
    ``divergence_time`` only.
    """

    mse: np.ndarray
    r2: np.ndarray
    horizon: float
    divergence_time: float | None = None

    @property
    def diverged(self) -> bool:
        return self.divergence_time is not None


def simulate_model(model: SparseModel, x0, t: np.ndarray, u_samples: np.ndarray | None = None,
                   feedback: ForcingLaw | None = None, bound: float = BLOWUP):
    """RK4 integration of an identified model on the grid `t`.

    Inputs come either from `u_samples` (linearly interpolated to the RK4
    stage times) or, for closed-loop laws, from `feedback` evaluated on the
    predicted state. Returns ``(X, divergence_time)``; rows after divergence
    are NaN.
    """
    t = np.asarray(t, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    if x0.shape[0] != model.n_states:
        raise ValueError(f"x0 has {x0.shape[0]} entries, model has {model.n_states} states")
    rhs = model.rhs_function()
    if feedback is not None and feedback.state_dependent:
        def f(ti, x):
            return rhs(x, feedback(ti, x))
    else:
        if u_samples is None:
            U = np.zeros((t.shape[0], model.n_inputs))
        else:
            U = np.asarray(u_samples, dtype=np.float64).reshape(t.shape[0], -1)
            if U.shape[1] != model.n_inputs:
                raise ValueError(f"u has {U.shape[1]} columns, model expects {model.n_inputs}")
        if U.shape[1] == 0:
            def f(ti, x):
                return rhs(x, U[0])
        else:
            cols = [U[:, k] for k in range(U.shape[1])]

            def f(ti, x):
                return rhs(x, np.array([np.interp(ti, t, c) for c in cols]))

    X, stop = rk4(f, x0, t, bound)
    return X, (None if stop is None else float(t[stop]))


def score(predicted: np.ndarray, truth: np.ndarray, t: np.ndarray | None = None,
          divergence_time: float | None = None) -> EvalReport:
    """MSE and R^2 per state, over the finite prefix of `predicted`."""
    predicted = np.atleast_2d(np.asarray(predicted, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    n = truth.shape[0]
    if t is None:
        t = np.arange(n, dtype=np.float64)
    finite = np.all(np.isfinite(predicted), axis=1)
    end = n if finite.all() else int(np.argmin(finite))
    if end == 0:
        nan = np.full(truth.shape[1], np.nan)
        return EvalReport(nan, nan, 0.0, float(t[0]) if divergence_time is None else divergence_time)
    P, T = predicted[:end], truth[:end]
    err = np.sum((P - T) ** 2, axis=0)
    ss = np.sum((T - T.mean(axis=0)) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(ss > 0, 1.0 - err / ss, np.where(err == 0, 1.0, -np.inf))
    if divergence_time is None and end < n:
        divergence_time = float(t[end])
    return EvalReport(err / end, r2, float(t[end - 1] - t[0]), divergence_time)


def validate(model: SparseModel, val: TimeSeriesDataset, forcing: ForcingLaw | None = None):
    """Simulate from the true state at the validation start and score the run.

    Returns ``(report, trajectory)``.
    """
    if val.truth is None:
        raise ValueError("validation needs the noise-free truth")
    X, tdiv = simulate_model(model, val.truth[0], val.t, val.U, forcing)
    return score(X, val.truth, val.t, tdiv), X


def _tuning_key(report: EvalReport):
    # non-divergent first, then lowest mean MSE; divergent runs rank by how long they lasted
    if report.diverged:
        return (1, -report.horizon, 0.0)
    return (0, 0.0, float(np.mean(report.mse)))


def tune_sindyc(train: TimeSeriesDataset, val: TimeSeriesDataset, base: StlsConfig,
                forcing: ForcingLaw | None = None, grid: Sequence[float] = THRESHOLD_GRID):
    """Fit STLS for every threshold in `grid` and keep the best on validation.

    Returns ``(model, config, report, trajectory, scores)``.
    """
    best = None
    scores = {}
    for thr in grid:
        cfg = replace(base, threshold=float(thr))
        model = fit_sindyc(train, cfg)
        report, X = validate(model, val, forcing)
        scores[float(thr)] = report
        key = _tuning_key(report)
        if best is None or key < best[0]:
            best = (key, model, cfg, report, X)
    return best[1], best[2], best[3], best[4], scores


@dataclass
class MethodResult:
    method: str
    model: SparseModel
    report: EvalReport
    trajectory: np.ndarray
    trace: object = None
    settings: dict = field(default_factory=dict)


@dataclass
class BenchmarkResult:
    system: str
    snr_db: float | None
    t: np.ndarray
    truth: np.ndarray
    methods: dict[str, MethodResult]


def run_benchmark(cfg: BenchmarkConfig, pipeline: PipelineConfig | None = None,
                  methods: Sequence[str] = ("argosc", "sindyc"), stls: StlsConfig | None = None,
                  sindyc_grid: Sequence[float] = THRESHOLD_GRID) -> BenchmarkResult:
    """Simulate, add noise, split, fit each method and validate it.

    ``argos`` is ARGOSc with the inputs left out of the library. Validation
    replays the true input samples, except for state-feedback laws, which are
    recomputed from the predicted state.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    pipeline = pipeline or PipelineConfig()
    stls = stls or StlsConfig(degree=pipeline.degree)
    clean = integrate(cfg)
    noisy = add_noise(clean, math.inf if cfg.snr_db is None else cfg.snr_db, cfg.seed)
    train, val = split(noisy, cfg.train_seconds)
    results = {}
    for method in methods:
        log.info("%s @ %s dB: fitting %s", cfg.system.name, cfg.snr_db, method)
        started = time.perf_counter()
        if method in ("argosc", "argos"):
            pc = replace(pipeline, include_inputs=(method == "argosc"))
            model, trace = fit_argosc(train, pc)
            elapsed = time.perf_counter() - started
            report, X = validate(model, val, cfg.forcing)
            results[method] = MethodResult(method, model, report, X, trace,
                                           {"sg_windows": trace.sg_windows, "fit_seconds": elapsed})
        else:
            model, scfg, report, X, scores = tune_sindyc(train, val, stls, cfg.forcing, sindyc_grid)
            results[method] = MethodResult(
                method, model, report, X, None,
                {"threshold": scfg.threshold, "differentiation": scfg.differentiation,
                 "fit_seconds": time.perf_counter() - started,
                 "tuning_mean_mse": {k: float(np.mean(v.mse)) for k, v in scores.items()}})
    return BenchmarkResult(cfg.system.name, cfg.snr_db, val.t, val.truth, results)


TABLE_COLUMNS = ("system", "method", "snr_db", "state", "mse", "r2", "horizon", "divergence_time")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_rows(results: Sequence[BenchmarkResult]) -> list[dict]:
    """One row per (system, SNR, method, state)."""
    rows = []
    for res in results:
        for method, mr in res.methods.items():
            for j in range(res.truth.shape[1]):
                rows.append({
                    "system": res.system,
                    "method": method,
                    "snr_db": res.snr_db,
                    "state": f"x{j + 1}",
                    "mse": float(mr.report.mse[j]),
                    "r2": float(mr.report.r2[j]),
                    "horizon": mr.report.horizon,
                    "divergence_time": mr.report.divergence_time,
                })
    return rows


def _atomic_csv(path, header, rows):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    os.replace(tmp, path)


def write_table(rows: Sequence[dict], path) -> None:
    _atomic_csv(path, TABLE_COLUMNS, [[_fmt(r[c]) for c in TABLE_COLUMNS] for r in rows])


def write_trajectories(res: BenchmarkResult, path) -> None:
    """Columns ``t, true_x1.., <method>_x1..`` on the validation grid."""
    m = res.truth.shape[1]
    header = ["t"] + [f"true_x{j + 1}" for j in range(m)]
    blocks = [res.t[:, None], res.truth]
    for method, mr in res.methods.items():
        header += [f"{method}_x{j + 1}" for j in range(m)]
        blocks.append(mr.trajectory)
    data = np.hstack(blocks)
    _atomic_csv(path, header, [[repr(float(v)) for v in row] for row in data])
