"""Savitzky-Golay smoothing and differentiation of state signals.

Window selection in ``auto`` mode minimises generalised cross-validation,

    GCV(w) = n * RSS(w) / (n - tr(H_w))**2,

with ``tr(H_w)`` approximated by ``n`` times the centre weight of the
smoothing kernel. Polynomial order is fixed at 4 by default.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import savgol_coeffs, savgol_filter

from .data import TimeSeriesDataset

__all__ = ["SGParams", "SmoothedDerivatives", "sg_filter", "gcv_window",
           "smooth_and_differentiate", "central_difference"]

MAX_AUTO_WINDOW = 501


@dataclass(frozen=True)
class SGParams:
    window: int = 0
    poly_order: int = 4
    selection: str = "auto"

    def __post_init__(self):
        if self.selection not in ("auto", "fixed"):
            raise ValueError("selection must be 'auto' or 'fixed'")
        if self.poly_order < 2:
            raise ValueError("poly_order must be >= 2")
        if self.selection == "fixed":
            self.check(None)

    def check(self, n: int | None):
        w = self.window
        if w % 2 != 1:
            raise ValueError(f"window must be odd, got {w}")
        if w < self.poly_order + 2:
            raise ValueError(f"window {w} too short for poly_order {self.poly_order}")
        if n is not None and w > n:
            raise ValueError(f"window {w} exceeds signal length {n}")


@dataclass(frozen=True)
class SmoothedDerivatives:
    X_s: np.ndarray
    Xdot: np.ndarray
    params_used: tuple[SGParams, ...]


def sg_filter(y, dt: float, params: SGParams, deriv: int = 0) -> np.ndarray:
    """Savitzky-Golay value (``deriv=0``) or first derivative (``deriv=1``).

    Edges use the polynomial fitted to the first/last `window` samples,
    evaluated at each edge sample's offset; no padding.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("sg_filter works on 1-d signals")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite input")
    if deriv not in (0, 1):
        raise ValueError("deriv must be 0 or 1")
    params.check(y.shape[0])
    return savgol_filter(y, params.window, params.poly_order, deriv=deriv,
                         delta=dt, mode="interp")


def _candidate_windows(n: int, poly_order: int) -> np.ndarray:
    lo = poly_order + 2
    lo += 1 - lo % 2
    hi = min(n // 10, MAX_AUTO_WINDOW)
    hi -= 1 - hi % 2
    if hi < lo:
        hi = lo
    return np.arange(lo, hi + 1, 2)


def gcv_window(y, poly_order: int = 4) -> tuple[int, np.ndarray, np.ndarray]:
    """Odd window minimising GCV. Returns ``(window, windows, scores)``."""
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    windows = _candidate_windows(n, poly_order)
    scores = np.empty(windows.shape[0])
    for k, w in enumerate(windows):
        if w > n:
            scores[k] = np.inf
            continue
        fit = savgol_filter(y, int(w), poly_order, mode="interp")
        rss = float(np.sum((y - fit) ** 2))
        h0 = savgol_coeffs(int(w), poly_order)[w // 2]
        scores[k] = n * rss / (n * (1.0 - h0)) ** 2
    best = int(windows[int(np.argmin(scores))])
    return best, windows, scores


def smooth_and_differentiate(ds: TimeSeriesDataset, params: SGParams | None = None) -> SmoothedDerivatives:
    """Smooth every state column and estimate its time derivative."""
    params = params or SGParams()
    n = ds.n
    X_s = np.empty_like(ds.X)
    Xdot = np.empty_like(ds.X)
    used = []
    for j in range(ds.m):
        y = ds.X[:, j]
        if params.selection == "auto":
            if n < 25:
                raise ValueError("automatic window selection needs at least 25 samples")
            w, _, _ = gcv_window(y, params.poly_order)
            p = replace(params, window=w, selection="fixed")
        else:
            p = params
        X_s[:, j] = sg_filter(y, ds.dt, p, deriv=0)
        Xdot[:, j] = sg_filter(y, ds.dt, p, deriv=1)
        used.append(p)
    return SmoothedDerivatives(X_s=X_s, Xdot=Xdot, params_used=tuple(used))


def central_difference(X: np.ndarray, dt: float) -> np.ndarray:
    """Second-order central differences, one-sided second-order at the ends."""
    return np.gradient(np.asarray(X, dtype=np.float64), dt, axis=0, edge_order=2)
