"""Candidate-function libraries over states and inputs.

Columns are all monomials in the combined variables ``(x1..xm, u1..ur)`` of
total degree <= d in graded order, followed by any custom terms sorted by tag.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np

from .data import TermDescriptor

__all__ = ["LibrarySpec", "DesignMatrix", "ScalingRecord", "monomial_terms",
           "build_design_matrix", "trim_library", "standardize"]


@dataclass(frozen=True)
class LibrarySpec:
    """Library definition.

    ``custom`` is a sequence of ``(tag, func)`` with ``func(Z) -> (n,)`` taking
    the combined ``(n, m + r)`` variable matrix. With ``include_inputs=False``
    the input variables get zero exponent everywhere (state-only library).
    """

    degree: int = 5
    custom: Sequence[tuple[str, Callable]] = field(default=(), compare=False)
    include_constant: bool = True
    include_inputs: bool = True

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        tags = [tag for tag, _ in self.custom]
        if len(set(tags)) != len(tags):
            raise ValueError("custom tags must be unique")
        object.__setattr__(self, "custom", tuple(self.custom))


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    terms: tuple[TermDescriptor, ...]
    custom: dict = field(default_factory=dict, compare=False)

    @property
    def p(self) -> int:
        return len(self.terms)

    def columns(self, idx) -> "DesignMatrix":
        idx = list(idx)
        return DesignMatrix(self.values[:, idx], tuple(self.terms[k] for k in idx), self.custom)


def monomial_terms(n_vars: int, degree: int, active: Sequence[int] | None = None,
                   include_constant: bool = True) -> list[TermDescriptor]:
    """All monomials of total degree <= `degree` in the `active` variables, graded order."""
    active = list(range(n_vars)) if active is None else list(active)
    terms = []
    for deg in range(0 if include_constant else 1, degree + 1):
        for combo in combinations_with_replacement(active, deg):
            e = [0] * n_vars
            for k in combo:
                e[k] += 1
            terms.append(TermDescriptor(tuple(e)))
    return sorted(terms, key=TermDescriptor.sort_key)


def _evaluate(terms, Z, custom) -> np.ndarray:
    out = np.empty((Z.shape[0], len(terms)))
    for k, term in enumerate(terms):
        col = term.evaluate(Z, custom)
        if not np.all(np.isfinite(col)):
            raise FloatingPointError(f"column {k} ({term}) is not finite")
        out[:, k] = col
    return out


def build_design_matrix(X, U, spec: LibrarySpec) -> DesignMatrix:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    U = np.asarray(U, dtype=np.float64).reshape(X.shape[0], -1)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(U))):
        raise ValueError("inputs must be finite")
    m, r = X.shape[1], U.shape[1]
    Z = np.hstack([X, U])
    active = range(m + r) if spec.include_inputs else range(m)
    terms = monomial_terms(m + r, spec.degree, active, spec.include_constant)
    custom = dict(spec.custom)
    terms += [TermDescriptor((0,) * (m + r), tag) for tag in sorted(custom)]
    with np.errstate(over="ignore", invalid="ignore"):
        values = _evaluate(terms, Z, custom)
    return DesignMatrix(values, tuple(terms), custom)


def trim_library(dm: DesignMatrix, selected) -> DesignMatrix:
    """Keep monomials up to the largest degree among `selected` columns (at least 1).

    Custom columns survive only if selected. Column order is preserved.
    """
    selected = set(int(k) for k in selected)
    degs = [dm.terms[k].degree for k in selected if not dm.terms[k].is_custom]
    d1 = max([1] + degs)
    keep = [k for k, term in enumerate(dm.terms)
            if (term.is_custom and k in selected) or (not term.is_custom and term.degree <= d1)]
    return dm.columns(keep)


@dataclass(frozen=True)
class ScalingRecord:
    """Column means/scales so that ``Z = (A - mean) / scale`` on scaled columns.

    ``zero_var`` marks columns left untouched (the constant column and any
    column without spread); those are excluded from penalised fits.
    """

    mean: np.ndarray
    scale: np.ndarray
    zero_var: np.ndarray
    intercept_col: int | None

    def to_raw(self, beta_std: np.ndarray) -> np.ndarray:
        """Map coefficients for the standardised matrix to the raw matrix.

        Exact for any coefficient vector: ``Z @ b == A @ to_raw(b)``.
        """
        b = np.asarray(beta_std, dtype=np.float64)
        raw = np.where(self.zero_var, b, b / self.scale)
        if self.intercept_col is not None:
            shift = np.sum(np.where(self.zero_var, 0.0, raw * self.mean))
            raw = raw.copy()
            raw[self.intercept_col] -= shift
        return raw


def standardize(dm: DesignMatrix, weights=None) -> tuple[DesignMatrix, ScalingRecord]:
    """Centre and scale each non-constant column to unit sample standard deviation.

    Centring happens only when the library has a constant column (which then
    absorbs the shift). `weights` are optional row multiplicities (bootstrap).
    """
    A = dm.values
    n = A.shape[0]
    if n < 2:
        raise ValueError("need at least 2 rows")
    const = [k for k, t in enumerate(dm.terms) if t.is_constant]
    intercept_col = const[0] if const else None
    if weights is None:
        mean = A.mean(axis=0)
        sd = A.std(axis=0, ddof=1)
    else:
        w = np.asarray(weights, dtype=np.float64)
        tot = w.sum()
        mean = w @ A / tot
        sd = np.sqrt(np.maximum(w @ (A - mean) ** 2 / (tot - 1.0), 0.0))
    spread = np.max(np.abs(A), axis=0)
    zero_var = sd <= 1e-12 * np.maximum(spread, 1e-300)
    zero_var |= spread == 0
    if intercept_col is not None:
        zero_var[intercept_col] = True
    if intercept_col is None:
        mean = np.zeros_like(mean)
    scale = np.where(zero_var, 1.0, sd)
    mean = np.where(zero_var, 0.0, mean)
    Z = (A - mean) / scale
    rec = ScalingRecord(mean, scale, zero_var, intercept_col)
    return DesignMatrix(Z, dm.terms, dm.custom), rec
