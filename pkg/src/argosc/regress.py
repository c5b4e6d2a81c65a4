"""Least squares, ridge and (adaptive) LASSO by cyclic coordinate descent.

The LASSO objective is

    (1 / (2 n)) * ||y - A b||^2 + lam * sum_k w_k |b_k|

solved with covariance updates on the Gram matrix ``A^T A / n``. A weight of
``inf`` pins a coefficient at zero, a weight of ``0`` leaves it unpenalised.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "LassoConvergenceError",
    "LassoPath",
    "ols",
    "ridge",
    "ridge_cv",
    "soft_threshold",
    "lasso_cd",
    "lasso_cd_gram",
    "lambda_max",
    "lambda_grid",
    "kkt_violation",
    "adaptive_weights",
    "contiguous_folds",
    "cv_select_lambda",
]

CD_TOL = 1e-9
CD_MAX_SWEEPS = 100_000
NEWTON_EVERY = 25


class LassoConvergenceError(RuntimeError):
    def __init__(self, sweeps, max_change):
        super().__init__(
            f"coordinate descent did not converge: {sweeps} sweeps, last max change {max_change:.3e}")
        self.sweeps = sweeps
        self.max_change = max_change


def ols(A, y):
    """Least squares ``argmin ||y - A b||^2`` and its residual sum of squares.

    Columns are equilibrated before the SVD solve, so rank deficiency is judged
    on a common scale; the returned solution is the minimum-norm one in that
    metric.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    k = A.shape[1]
    if k == 0:
        return np.zeros(0), float(y @ y)
    norms = np.sqrt(np.sum(A * A, axis=0))
    norms = np.where(norms > 0, norms, 1.0)
    b, *_ = np.linalg.lstsq(A / norms, y, rcond=None)
    beta = b / norms
    resid = y - A @ beta
    return beta, float(resid @ resid)


def ridge(A, y, lambda_r: float, unpenalized=None):
    """Minimiser of ``||y - A b||^2 + lambda_r * ||b||^2`` over penalised columns.

    `unpenalized` is a boolean mask (or index list) of columns exempt from the
    penalty; by default all-constant columns are exempt.
    """
    if not lambda_r > 0:
        raise ValueError("lambda_r must be positive")
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = A.shape[1]
    if unpenalized is None:
        free = np.all(A == A[:1], axis=0) & np.any(A != 0, axis=0)
    else:
        free = np.zeros(p, dtype=bool)
        free[np.asarray(unpenalized)] = True
    D = np.diag(np.where(free, 0.0, np.sqrt(lambda_r)))
    D = D[~free]
    Aug = np.vstack([A, D])
    yaug = np.concatenate([y, np.zeros(D.shape[0])])
    beta, *_ = np.linalg.lstsq(Aug, yaug, rcond=None)
    return beta


def contiguous_folds(n: int, folds: int) -> list[np.ndarray]:
    """Contiguous, nearly equal row blocks."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise ValueError(f"{folds} folds requested for {n} rows")
    bounds = np.linspace(0, n, folds + 1).round().astype(int)
    return [np.arange(bounds[i], bounds[i + 1]) for i in range(folds)]


def _fold_split(n, test):
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    return mask


def ridge_cv(A, y, folds: int = 10, grid=None, fit_intercept: bool = True):
    """Pick the ridge strength by contiguous-fold CV; returns ``(lambda_r, beta)``.

    `A` should hold standardised, non-constant columns. The default grid spans
    ``s_max**2 * 10**[-15 .. 0]`` with ``s_max`` the largest singular value of
    `A`, so it reaches down to near-OLS for well-determined noiseless problems.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = A.shape[0]
    if grid is None:
        smax = np.linalg.norm(A, 2)
        grid = max(smax * smax, 1e-300) * np.logspace(-15, 0, 61)
    grid = np.asarray(grid, dtype=np.float64)
    err = np.zeros(grid.shape[0])
    for test in contiguous_folds(n, folds):
        train = _fold_split(n, test)
        At, yt = A[train], y[train]
        if fit_intercept:
            am, ym = At.mean(axis=0), yt.mean()
        else:
            am, ym = np.zeros(A.shape[1]), 0.0
        U, s, Vt = np.linalg.svd(At - am, full_matrices=False)
        Uty = U.T @ (yt - ym)
        Ate = A[test] - am
        for i, lam in enumerate(grid):
            b = Vt.T @ (s / (s * s + lam) * Uty)
            r = y[test] - ym - Ate @ b
            err[i] += r @ r
    best = float(grid[int(np.argmin(err))])
    if fit_intercept:
        am, ym = A.mean(axis=0), y.mean()
    else:
        am, ym = np.zeros(A.shape[1]), 0.0
    U, s, Vt = np.linalg.svd(A - am, full_matrices=False)
    beta = Vt.T @ (s / (s * s + best) * (U.T @ (y - ym)))
    return best, beta


def adaptive_weights(beta_ridge, eps: float = 1e-9, gamma: float = 1.0) -> np.ndarray:
    return 1.0 / (np.abs(np.asarray(beta_ridge, dtype=np.float64)) + eps) ** gamma


def soft_threshold(z, gamma):
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


@numba.njit(cache=True)
def _objective(G, c, pen, beta):
    q = 0.0
    p = beta.shape[0]
    for i in range(p):
        if beta[i] != 0.0:
            q += pen[i] * abs(beta[i]) - c[i] * beta[i]
            for j in range(p):
                q += 0.5 * beta[i] * G[i, j] * beta[j]
    return q


@numba.njit(cache=True)
def _sweep(G, pen, beta, g, active_only):
    p = beta.shape[0]
    max_change = 0.0
    for k in range(p):
        if active_only and beta[k] == 0.0:
            continue
        gkk = G[k, k]
        if gkk <= 0.0 or pen[k] == np.inf:
            continue
        z = g[k] + gkk * beta[k]
        a = abs(z) - pen[k]
        new = 0.0
        if a > 0.0:
            new = (a if z > 0.0 else -a) / gkk
        d = new - beta[k]
        if d != 0.0:
            for i in range(p):
                g[i] -= G[i, k] * d
            beta[k] = new
            if abs(d) > max_change:
                max_change = abs(d)
    return max_change


@numba.njit(cache=True)
def _newton_active(G, c, pen, beta, g):
    """Move towards the minimiser on the current sign pattern.

    On a fixed orthant face the objective is quadratic, so its minimiser is
    one eigen-solve away; coordinate descent alone crawls there when the
    active columns are nearly collinear. If the face quadratic is flat in a
    direction along which the objective still falls, the move follows that
    direction instead. Either way it stops at the first sign change, and it
    is undone unless the objective strictly decreases.
    """
    idx = np.flatnonzero(beta)
    k = idx.shape[0]
    if k == 0:
        return False
    Gaa = np.empty((k, k))
    rhs = np.empty(k)
    cur = np.empty(k)
    for a in range(k):
        ia = idx[a]
        cur[a] = beta[ia]
        rhs[a] = c[ia] - pen[ia] * np.sign(beta[ia])
        for b in range(k):
            Gaa[a, b] = G[ia, idx[b]]
    evals, V = np.linalg.eigh(Gaa)
    top = max(evals[-1], 0.0)
    if top == 0.0:
        return False
    r = V.T @ rhs
    flat = evals <= 1e-12 * top
    if np.any(flat) and np.sum(r[flat] ** 2) > 1e-24 * np.sum(r ** 2):
        d = V[:, flat] @ r[flat]
        step = np.inf
    else:
        z = V.T @ cur
        for i in range(k):
            if not flat[i]:
                z[i] = r[i] / evals[i]
        d = V @ z - cur
        step = 1.0
    hit = -1
    for a in range(k):
        if not np.isfinite(d[a]):
            return False
        if d[a] * cur[a] < 0.0:
            t = -cur[a] / d[a]
            if t < step:
                step = t
                hit = a
    if not np.isfinite(step):
        return False
    before = _objective(G, c, pen, beta)
    for a in range(k):
        beta[idx[a]] = cur[a] + step * d[a]
    if hit >= 0:
        beta[idx[hit]] = 0.0
    if not _objective(G, c, pen, beta) < before:
        for a in range(k):
            beta[idx[a]] = cur[a]
        return False
    g[:] = c - G @ beta
    return True


@numba.njit(cache=True)
def _cd_gram(G, c, pen, beta, tol, max_sweeps, debug):
    p = beta.shape[0]
    for k in range(p):
        if pen[k] == np.inf:
            beta[k] = 0.0
    g = c - G @ beta
    sweeps = 0
    max_change = np.inf
    last = _objective(G, c, pen, beta) if debug else 0.0
    while sweeps < max_sweeps:
        max_change = _sweep(G, pen, beta, g, False)
        sweeps += 1
        if debug:
            cur = _objective(G, c, pen, beta)
            if cur > last + 1e-12 * (1.0 + abs(last)):
                return -sweeps, max_change
            last = cur
        if max_change < tol:
            return sweeps, max_change
        inner_count = 0
        while sweeps < max_sweeps:
            inner = _sweep(G, pen, beta, g, True)
            sweeps += 1
            inner_count += 1
            if inner >= tol and inner_count % NEWTON_EVERY == 0:
                _newton_active(G, c, pen, beta, g)
            if debug:
                cur = _objective(G, c, pen, beta)
                if cur > last + 1e-12 * (1.0 + abs(last)):
                    return -sweeps, inner
                last = cur
            if inner < tol:
                break
    return sweeps, max_change


def _penalty_vector(lam, w, p):
    w = np.ones(p) if w is None else np.asarray(w, dtype=np.float64)
    if w.shape != (p,):
        raise ValueError(f"weights must have length {p}")
    if np.any(np.isnan(w)) or np.any(w < 0):
        raise ValueError("weights must be non-negative, no NaN")
    with np.errstate(invalid="ignore"):
        pen = lam * w
    # 0 * inf: column is dropped regardless of lambda
    pen[np.isinf(w)] = np.inf
    return pen


def lasso_cd_gram(G, c, lam, w=None, beta0=None, tol=CD_TOL, max_sweeps=CD_MAX_SWEEPS,
                  debug=False):
    """Coordinate descent given ``G = A^T A / n`` and ``c = A^T y / n``."""
    G = np.ascontiguousarray(G, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    p = c.shape[0]
    pen = _penalty_vector(float(lam), w, p)
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    sweeps, change = _cd_gram(G, c, pen, beta, float(tol), int(max_sweeps), bool(debug))
    if sweeps < 0:
        raise AssertionError(f"objective increased at sweep {-sweeps}")
    if change >= tol:
        raise LassoConvergenceError(sweeps, change)
    return beta


def lasso_cd(A, y, lam, w=None, beta0=None, tol=CD_TOL, max_sweeps=CD_MAX_SWEEPS, debug=False):
    """Weighted LASSO by cyclic coordinate descent (warm-startable via `beta0`).

    No intercept is fitted; centre `A` and `y` beforehand if one is wanted.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = A.shape[0]
    return lasso_cd_gram(A.T @ A / n, A.T @ y / n, lam, w, beta0, tol, max_sweeps, debug)


def lambda_max(A, y, w=None) -> float:
    """Smallest penalty giving the all-zero solution (unpenalised columns aside)."""
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = A.shape
    w = np.ones(p) if w is None else np.asarray(w, dtype=np.float64)
    free = w == 0
    r = y
    if np.any(free):
        b, _ = ols(A[:, free], y)
        r = y - A[:, free] @ b
    c = np.abs(A.T @ r) / n
    ok = np.isfinite(w) & (w > 0)
    if not np.any(ok):
        return 0.0
    return float(np.max(c[ok] / w[ok]))


def lambda_grid(lmax: float, n_lambda: int = 100, ratio: float = 1e-4) -> np.ndarray:
    return lmax * np.logspace(0.0, np.log10(ratio), n_lambda)


def kkt_violation(A, y, beta, lam, w=None) -> float:
    """Largest violation of the weighted-LASSO optimality conditions."""
    A = np.asarray(A, dtype=np.float64)
    n, p = A.shape
    w = np.ones(p) if w is None else np.asarray(w, dtype=np.float64)
    grad = A.T @ (A @ beta - y) / n
    worst = 0.0
    for k in range(p):
        if np.isinf(w[k]):
            continue
        bound = lam * w[k]
        if beta[k] != 0:
            worst = max(worst, abs(grad[k] + bound * np.sign(beta[k])))
        else:
            worst = max(worst, abs(grad[k]) - bound)
    return float(worst)


@dataclass(frozen=True)
class LassoPath:
    lambdas: np.ndarray
    coefs: np.ndarray
    cv_mean: np.ndarray | None
    cv_se: np.ndarray | None
    lambda_star: float

    @property
    def beta_star(self) -> np.ndarray:
        return self.coefs[:, int(np.flatnonzero(self.lambdas == self.lambda_star)[0])]


def _path(G, c, lambdas, w, tol, max_sweeps):
    p = c.shape[0]
    coefs = np.zeros((p, lambdas.shape[0]))
    beta = np.zeros(p)
    for i, lam in enumerate(lambdas):
        beta = lasso_cd_gram(G, c, lam, w, beta, tol, max_sweeps)
        coefs[:, i] = beta
    return coefs


def cv_select_lambda(A, y, w=None, folds: int = 10, lambda_grid_=None, fit_intercept: bool = True,
                     tol=CD_TOL, max_sweeps=CD_MAX_SWEEPS) -> LassoPath:
    """Contiguous-fold CV over a descending penalty grid; min-mean-MSE rule.

    Paths are warm-started from the largest penalty. Coefficients in the
    returned path are fitted on all rows (after centring when
    `fit_intercept`).
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = A.shape
    w = np.ones(p) if w is None else np.asarray(w, dtype=np.float64)
    fold_rows = contiguous_folds(n, folds)

    def centred(Am, ym):
        if fit_intercept:
            return Am - Am.mean(axis=0), ym - ym.mean(), Am.mean(axis=0), ym.mean()
        return Am, ym, np.zeros(p), 0.0

    Ac, yc, _, _ = centred(A, y)
    if lambda_grid_ is None:
        lmax = lambda_max(Ac, yc, w)
        if lmax <= 0:
            lmax = 1.0
        lambdas = lambda_grid(lmax)
    else:
        lambdas = np.asarray(lambda_grid_, dtype=np.float64)
        if lambdas.size == 0:
            raise ValueError("empty lambda grid")
        if np.any(np.diff(lambdas) >= 0):
            raise ValueError("lambda grid must be strictly descending (no duplicates)")
        if np.any(lambdas <= 0):
            raise ValueError("lambdas must be positive")

    mse = np.zeros((folds, lambdas.shape[0]))
    for f, test in enumerate(fold_rows):
        train = _fold_split(n, test)
        At, yt, am, ym = centred(A[train], y[train])
        nt = At.shape[0]
        coefs = _path(At.T @ At / nt, At.T @ yt / nt, lambdas, w, tol, max_sweeps)
        pred = ym + (A[test] - am) @ coefs
        mse[f] = np.mean((y[test][:, None] - pred) ** 2, axis=0)
    cv_mean = mse.mean(axis=0)
    cv_se = mse.std(axis=0, ddof=1) / np.sqrt(folds)
    star = int(np.argmin(cv_mean))
    coefs = _path(Ac.T @ Ac / n, Ac.T @ yc / n, lambdas, w, tol, max_sweeps)
    return LassoPath(lambdas, coefs, cv_mean, cv_se, float(lambdas[star]))
