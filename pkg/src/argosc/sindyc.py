"""SINDy with control: sequential thresholded least squares over the ARGOSc library."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import SparseModel, StateModel, TimeSeriesDataset
from .features import LibrarySpec, build_design_matrix
from .regress import ols
from .smoothing import SGParams, central_difference, smooth_and_differentiate

__all__ = ["StlsConfig", "stls", "fit_sindyc", "THRESHOLD_GRID"]

THRESHOLD_GRID = (0.01, 0.05, 0.1, 0.2, 0.5)


@dataclass(frozen=True)
class StlsConfig:
    """STLS settings.

    ``differentiation="sg"`` regresses on the smoothed states and SG
    derivatives, exactly what ARGOSc sees; ``"central_difference"`` uses the raw
    measurements with second-order finite differences.
    """

    threshold: float = 0.1
    max_iter: int = 20
    degree: int = 5
    differentiation: str = "sg"
    sg: SGParams = field(default_factory=SGParams)
    include_inputs: bool = True

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.differentiation not in ("sg", "central_difference"):
            raise ValueError("differentiation must be 'sg' or 'central_difference'")


def stls(A: np.ndarray, y: np.ndarray, threshold: float, max_iter: int = 20):
    """Sequential thresholded least squares. Returns ``(coef, n_iter)``.

    The support only ever shrinks, so the loop stops once it is stable or
    after `max_iter` refits.
    """
    p = A.shape[1]
    support = np.ones(p, dtype=bool)
    coef = np.zeros(p)
    for it in range(1, max_iter + 1):
        coef = np.zeros(p)
        if support.any():
            coef[support] = ols(A[:, support], y)[0]
        small = np.abs(coef) < threshold
        new = support & ~small
        if np.array_equal(new, support):
            return coef, it
        support = new
        coef[~support] = 0.0
    coef = np.zeros(p)
    if support.any():
        coef[support] = ols(A[:, support], y)[0]
    return coef, max_iter


def fit_sindyc(ds: TimeSeriesDataset, cfg: StlsConfig | None = None) -> SparseModel:
    cfg = cfg or StlsConfig()
    if cfg.differentiation == "sg":
        sd = smooth_and_differentiate(ds, cfg.sg)
        X, Xdot = sd.X_s, sd.Xdot
    else:
        X, Xdot = ds.X, central_difference(ds.X, ds.dt)
    dm = build_design_matrix(X, ds.U, LibrarySpec(cfg.degree, (), True, cfg.include_inputs))
    states = []
    for j in range(ds.m):
        coef, it = stls(dm.values, Xdot[:, j], cfg.threshold, cfg.max_iter)
        keep = np.flatnonzero(coef)
        states.append(StateModel(tuple(dm.terms[k] for k in keep), coef[keep], None,
                                 {"threshold": cfg.threshold, "iterations": it}))
    return SparseModel(tuple(states), ds.r)
