"""ARGOSc: sparse identification of forced dynamics with bootstrap inference.

Per state equation:

1. smooth the states and estimate derivatives (Savitzky-Golay);
2. build the full library over states and inputs, standardise;
3. (adaptive) LASSO with the penalty chosen by 10-fold CV;
4. trim the library to the largest selected degree and refit;
5. threshold the refit coefficients on a grid, OLS on each support, keep the
   minimum-BIC model;
6. repeat step 5 (and the refit) on B row-resamples and keep the terms whose
   percentile interval excludes zero and contains the point estimate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import SparseModel, StateModel, TimeSeriesDataset
from .features import DesignMatrix, LibrarySpec, build_design_matrix, standardize, trim_library
from .regress import adaptive_weights, cv_select_lambda, lasso_cd_gram, ols, ridge_cv
from .smoothing import SGParams, smooth_and_differentiate

__all__ = [
    "PipelineConfig",
    "SelectionTrace",
    "StateTrace",
    "BootstrapResult",
    "bic",
    "ci_order_statistics",
    "bootstrap_ci",
    "threshold_select",
    "fit_argosc",
    "fit_library",
]

log = logging.getLogger(__name__)

DEFAULT_ETA = tuple(10.0 ** k for k in range(-8, 2))
RIDGE_EPS = 1e-9
# residual energy below this fraction of ||y||^2 counts as an exact fit
RSS_FLOOR = 1e-16


@dataclass(frozen=True)
class PipelineConfig:
    degree: int = 5
    penalty: str = "adaptive_lasso"
    eta_grid: Sequence[float] = DEFAULT_ETA
    B: int = 2000
    alpha: float = 0.05
    sg: SGParams = field(default_factory=SGParams)
    seed: int = 0
    folds: int = 10
    include_inputs: bool = True
    custom: Sequence[tuple[str, Callable]] = field(default=(), compare=False)

    def __post_init__(self):
        if self.penalty not in ("lasso", "adaptive_lasso"):
            raise ValueError("penalty must be 'lasso' or 'adaptive_lasso'")
        if self.B < 100:
            raise ValueError("B must be at least 100")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        eta = tuple(float(e) for e in self.eta_grid)
        if not eta or any(e <= 0 for e in eta) or any(b <= a for a, b in zip(eta, eta[1:])):
            raise ValueError("eta_grid must be positive and strictly ascending")
        object.__setattr__(self, "eta_grid", eta)

    @property
    def library(self) -> LibrarySpec:
        return LibrarySpec(self.degree, self.custom, True, self.include_inputs)


@dataclass
class StateTrace:
    initial_support: list
    d1: int
    refit_coef: np.ndarray
    eta_supports: list
    eta_coefs: list
    eta_bic: np.ndarray
    chosen: int
    lambda_initial: float
    lambda_star: float
    ridge_lambda: float | None
    library_terms: list
    bootstrap_counts: np.ndarray | None = None
    ci: np.ndarray | None = None

    def to_json(self):
        return {
            "initial_support": [t.to_json() for t in self.initial_support],
            "d1": self.d1,
            "library": [t.to_json() for t in self.library_terms],
            "refit_coef": self.refit_coef.tolist(),
            "eta": [{"support": list(map(int, s)), "coef": c.tolist(), "bic": float(b)}
                    for s, c, b in zip(self.eta_supports, self.eta_coefs, self.eta_bic)],
            "chosen": self.chosen,
            "lambda_initial": self.lambda_initial,
            "lambda_star": self.lambda_star,
            "ridge_lambda": self.ridge_lambda,
            "bootstrap_counts": None if self.bootstrap_counts is None else self.bootstrap_counts.tolist(),
            "ci": None if self.ci is None else self.ci.tolist(),
        }


@dataclass
class SelectionTrace:
    states: list[StateTrace]
    sg_windows: list[int]

    def to_json(self):
        return {"sg_windows": self.sg_windows, "states": [s.to_json() for s in self.states]}


def bic(rss: float, n: int, k: int) -> float:
    """Gaussian BIC up to an additive constant: ``n ln(rss/n) + k ln n``."""
    return n * math.log(max(rss, 1e-300) / n) + k * math.log(n)


def ci_order_statistics(B: int, alpha: float) -> tuple[int, int]:
    """1-based order statistics bounding the percentile interval."""
    lo = max(1, int(math.floor(B * alpha / 2 + 1e-9)))
    return lo, B - lo + 1


@dataclass(frozen=True)
class BootstrapResult:
    lower: np.ndarray
    upper: np.ndarray
    counts: np.ndarray
    samples: np.ndarray


def bootstrap_ci(fit_closure: Callable[[np.ndarray], np.ndarray], n_rows: int, B: int,
                 alpha: float, seed: int) -> BootstrapResult:
    """Pairs bootstrap of a coefficient estimator.

    ``fit_closure(rows)`` refits on the resampled row indices and returns the
    full coefficient vector (zeros for unselected terms). Replicate ``b`` draws
    from ``default_rng([seed, b])``.
    """
    if B < 100:
        raise ValueError("B must be at least 100")
    samples = None
    for b in range(B):
        rows = np.random.default_rng([seed, b]).integers(0, n_rows, n_rows)
        coef = np.asarray(fit_closure(rows), dtype=np.float64)
        if samples is None:
            samples = np.empty((B, coef.shape[0]))
        samples[b] = coef
    lo, up = ci_order_statistics(B, alpha)
    ordered = np.sort(samples, axis=0)
    return BootstrapResult(ordered[lo - 1], ordered[up - 1],
                           np.count_nonzero(samples, axis=0), samples)


# ---------------------------------------------------------------------------
# building blocks


def _penalized_fit(A: np.ndarray, terms, y: np.ndarray, cfg: PipelineConfig, folds: int,
                   lam: float | None = None, ridge_lambda: float | None = None):
    """(Adaptive) LASSO on the standardised library; coefficients on the raw scale.

    With `lam` given the CV is skipped (bootstrap replicates reuse the
    full-data penalty and ridge strength).
    """
    Z, rec = standardize(DesignMatrix(A, tuple(terms)))
    pen_cols = np.flatnonzero(~rec.zero_var)
    Xp = Z.values[:, pen_cols]
    n = Xp.shape[0]
    ybar = y.mean() if rec.intercept_col is not None else 0.0
    yc = y - ybar
    if cfg.penalty == "adaptive_lasso":
        if ridge_lambda is None:
            ridge_lambda, b_ridge = ridge_cv(Xp, yc, folds=folds, fit_intercept=False)
        else:
            G = Xp.T @ Xp
            G[np.diag_indices_from(G)] += ridge_lambda
            b_ridge = np.linalg.solve(G, Xp.T @ yc)
        w = adaptive_weights(b_ridge, RIDGE_EPS)
    else:
        w = np.ones(Xp.shape[1])
    if lam is None:
        path = cv_select_lambda(Xp, yc, w, folds=folds, fit_intercept=False)
        lam = path.lambda_star
        b = path.beta_star
    else:
        b = lasso_cd_gram(Xp.T @ Xp / n, Xp.T @ yc / n, lam, w)
    full = np.zeros(len(terms))
    full[pen_cols] = b
    if rec.intercept_col is not None:
        full[rec.intercept_col] = ybar
    return rec.to_raw(full), float(lam), ridge_lambda


def threshold_select(A: np.ndarray, y: np.ndarray, beta1: np.ndarray, eta_grid):
    """Hard-threshold `beta1` on each grid value, OLS on survivors, pick min BIC.

    Returns ``(coef, chosen_index, supports, coefs, bics)``. Exact BIC ties go to
    the smaller support, then to the smaller threshold index. RSS is floored
    at ``RSS_FLOOR * ||y||^2`` so that on noise-free data round-off and
    derivative truncation error cannot buy extra terms.
    """
    n = A.shape[0]
    floor = RSS_FLOOR * float(y @ y)
    cache = {}
    supports, coefs, bics = [], [], []
    for eta in eta_grid:
        K = tuple(np.flatnonzero(np.abs(beta1) >= eta))
        if K not in cache:
            c, rss = ols(A[:, list(K)], y) if K else (np.zeros(0), float(y @ y))
            cache[K] = (c, bic(max(rss, floor), n, len(K)))
        c, b = cache[K]
        supports.append(K)
        coefs.append(c)
        bics.append(b)
    bics = np.array(bics)
    best = min(range(len(bics)), key=lambda i: (bics[i], len(supports[i]), i))
    coef = np.zeros(A.shape[1])
    coef[list(supports[best])] = coefs[best]
    return coef, best, supports, coefs, bics


def _retain(A, y, point, lower, upper):
    """Terms whose interval excludes zero and contains the point estimate, refitted by OLS."""
    keep = [int(k) for k in np.flatnonzero(point)
            if (lower[k] > 0 or upper[k] < 0) and lower[k] <= point[k] <= upper[k]]
    coef = ols(A[:, keep], y)[0] if keep else np.zeros(0)
    return keep, coef


def fit_library(dm0: DesignMatrix, y: np.ndarray, cfg: PipelineConfig, seed: int):
    """Run the selection/inference steps for one response over a built library."""
    A0 = dm0.values
    n = A0.shape[0]
    beta0, lam0, _ = _penalized_fit(A0, dm0.terms, y, cfg, cfg.folds)
    selected = np.flatnonzero(beta0)
    dm1 = trim_library(dm0, selected)
    d1 = max([1] + [t.degree for t in (dm0.terms[k] for k in selected) if not t.is_custom])
    A1 = dm1.values
    beta1, lam1, ridge1 = _penalized_fit(A1, dm1.terms, y, cfg, cfg.folds)
    point, chosen, supports, coefs, bics = threshold_select(A1, y, beta1, cfg.eta_grid)

    def replicate(rows):
        Ab, yb = A1[rows], y[rows]
        b1, _, _ = _penalized_fit(Ab, dm1.terms, yb, cfg, cfg.folds, lam=lam1, ridge_lambda=ridge1)
        return threshold_select(Ab, yb, b1, cfg.eta_grid)[0]

    boot = bootstrap_ci(replicate, n, cfg.B, cfg.alpha, seed)
    keep, coef = _retain(A1, y, point, boot.lower, boot.upper)
    ci = np.column_stack([boot.lower, boot.upper])
    trace = StateTrace(
        initial_support=[dm0.terms[k] for k in selected], d1=d1, refit_coef=beta1,
        eta_supports=supports, eta_coefs=coefs, eta_bic=bics, chosen=chosen,
        lambda_initial=lam0, lambda_star=lam1, ridge_lambda=ridge1,
        library_terms=list(dm1.terms), bootstrap_counts=boot.counts, ci=ci)
    state = StateModel(
        terms=tuple(dm1.terms[k] for k in keep), coef=coef,
        ci=ci[keep] if keep else np.zeros((0, 2)),
        diagnostics={
            "point_estimate": [float(point[k]) for k in keep],
            "lambda_star": lam1, "lambda_initial": lam0, "eta": cfg.eta_grid[chosen],
            "bic": float(bics[chosen]), "B": cfg.B, "d1": d1,
            "ridge_lambda": ridge1, "n": n,
        })
    return state, trace


def fit_argosc(ds: TimeSeriesDataset, cfg: PipelineConfig | None = None):
    """Identify ``dx_j/dt = f_j(x, u)`` for every state of `ds`.

    Returns ``(SparseModel, SelectionTrace)``. With ``cfg.include_inputs``
    false the library ignores the inputs (plain ARGOS).
    """
    cfg = cfg or PipelineConfig()
    sd = smooth_and_differentiate(ds, cfg.sg)
    dm0 = build_design_matrix(sd.X_s, ds.U, cfg.library)
    states, traces = [], []
    for j in range(ds.m):
        log.info("state %d: library of %d terms", j + 1, dm0.p)
        sm, tr = fit_library(dm0, sd.Xdot[:, j], cfg, seed=_state_seed(cfg.seed, j))
        states.append(sm)
        traces.append(tr)
    model = SparseModel(tuple(states), ds.r, dict(cfg.custom))
    _check_retention(model)
    return model, SelectionTrace(traces, [p.window for p in sd.params_used])


def _state_seed(seed: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, j]).generate_state(1)[0])


def _check_retention(model: SparseModel):
    for sm in model.states:
        for c, (lo, up) in zip(sm.diagnostics.get("point_estimate", sm.coef), sm.ci):
            if not (lo <= c <= up and (lo > 0 or up < 0)):
                raise AssertionError("retained term violates the confidence-interval rule")
