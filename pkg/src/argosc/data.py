"""Shared domain types: datasets, term descriptors and fitted sparse models.

Datasets are stored as comma-delimited text with a single header row
``t,x1..xm,u1..ur[,true_x1..true_xm]``; provenance lives in a JSON sidecar
(``<path>.meta.json``) so the CSV stays readable by any plotting tool.
Models are stored as JSON.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "DatasetError",
    "TimeSeriesDataset",
    "TermDescriptor",
    "StateModel",
    "SparseModel",
    "save_dataset",
    "load_dataset",
    "save_model",
    "load_model",
    "render_model",
    "default_names",
]

UNIFORM_RTOL = 1e-9


class DatasetError(ValueError):
    """Raised when a dataset violates its invariants or a file is malformed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Sampled trajectory of a forced system.

    Parameters
    ----------
    t : (n,) array
        Uniformly spaced, strictly increasing sample times in seconds.
    X : (n, m) array
        Observed (possibly noisy) states.
    U : (n, r) array
        Forcing inputs.
    truth : (n, m) array, optional
        Noise-free states.
    meta : dict
        Provenance (system name, parameters, SNR, seed, ...).
    """

    t: np.ndarray
    X: np.ndarray
    U: np.ndarray
    truth: np.ndarray | None = None
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        X = np.asarray(self.X, dtype=np.float64)
        U = np.asarray(self.U, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if U.ndim == 1:
            U = U[:, None]
        if t.ndim != 1:
            raise DatasetError("t must be one-dimensional")
        n = t.shape[0]
        if n < 2:
            raise DatasetError("a dataset needs at least 2 samples")
        if X.shape[0] != n or U.shape[0] != n:
            raise DatasetError(
                f"row mismatch: len(t)={n}, X has {X.shape[0]}, U has {U.shape[0]}")
        truth = self.truth
        if truth is not None:
            truth = np.asarray(truth, dtype=np.float64)
            if truth.ndim == 1:
                truth = truth[:, None]
            if truth.shape != X.shape:
                raise DatasetError("truth must have the same shape as X")
        for name, arr in (("t", t), ("X", X), ("U", U), ("truth", truth)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise DatasetError(f"non-finite entry in {name}")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise DatasetError("non-increasing time grid")
        dt = (t[-1] - t[0]) / (n - 1)
        slack = UNIFORM_RTOL * dt + 8 * np.finfo(float).eps * np.max(np.abs(t))
        if np.max(np.abs(steps - dt)) > slack:
            raise DatasetError("non-uniform time grid")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "truth", None if truth is None else _frozen(truth))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.t.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def r(self) -> int:
        return self.U.shape[1]

    @property
    def dt(self) -> float:
        return float((self.t[-1] - self.t[0]) / (self.n - 1))

    def replace(self, **changes) -> "TimeSeriesDataset":
        kw = dict(t=self.t, X=self.X, U=self.U, truth=self.truth, meta=self.meta)
        kw.update(changes)
        return TimeSeriesDataset(**kw)

    def rows(self, sl) -> "TimeSeriesDataset":
        return self.replace(
            t=self.t[sl], X=self.X[sl], U=self.U[sl],
            truth=None if self.truth is None else self.truth[sl])


def save_dataset(ds: TimeSeriesDataset, path: str | os.PathLike) -> None:
    """Write `ds` as CSV (17 significant digits, exact round trip) plus meta sidecar."""
    path = Path(path)
    # the constructor already enforced the invariants; re-check in case of a forged object
    arrays = [ds.t[:, None], ds.X, ds.U] + ([ds.truth] if ds.truth is not None else [])
    data = np.hstack(arrays)
    if not np.all(np.isfinite(data)):
        raise DatasetError("refusing to write non-finite data")
    header = ["t"] + [f"x{i + 1}" for i in range(ds.m)] + [f"u{i + 1}" for i in range(ds.r)]
    if ds.truth is not None:
        header += [f"true_x{i + 1}" for i in range(ds.m)]
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
    with open(_meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(ds.meta), fh, indent=2, sort_keys=True)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def load_dataset(path: str | os.PathLike) -> TimeSeriesDataset:
    """Read a dataset written by :func:`save_dataset`."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not header or header[0] != "t":
        raise DatasetError("header must start with 't'")
    xs = [h for h in header if h.startswith("x")]
    us = [h for h in header if h.startswith("u")]
    trues = [h for h in header if h.startswith("true_x")]
    m, r = len(xs), len(us)
    expected = ["t"] + [f"x{i + 1}" for i in range(m)] + [f"u{i + 1}" for i in range(r)]
    if trues:
        expected += [f"true_x{i + 1}" for i in range(m)]
    if header != expected:
        raise DatasetError(f"unrecognised header {header!r}")
    rows = []
    for k, ln in enumerate(lines, start=2):
        fields = ln.split(",")
        if len(fields) != len(header):
            raise DatasetError(
                f"line {k}: expected {len(header)} fields, found {len(fields)}")
        try:
            rows.append([float(v) for v in fields])
        except ValueError as exc:
            raise DatasetError(f"line {k}: {exc}") from None
    if not rows:
        raise DatasetError("no data rows")
    data = np.array(rows, dtype=np.float64)
    meta = {}
    mp = _meta_path(path)
    if mp.exists():
        with open(mp, encoding="utf-8") as fh:
            meta = json.load(fh)
    return TimeSeriesDataset(
        t=data[:, 0], X=data[:, 1:1 + m], U=data[:, 1 + m:1 + m + r],
        truth=data[:, 1 + m + r:] if trues else None, meta=meta)


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


@dataclass(frozen=True, order=False)
class TermDescriptor:
    """Candidate function: a monomial given by per-variable exponents, or a custom term.

    Variables are ordered states first, then inputs. The all-zero monomial is
    the constant term.
    """

    exponents: tuple[int, ...]
    custom_tag: str | None = None

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponents)
        if any(e < 0 for e in exps):
            raise ValueError("exponents must be non-negative")
        object.__setattr__(self, "exponents", exps)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @property
    def is_constant(self) -> bool:
        return self.custom_tag is None and self.degree == 0

    @property
    def is_custom(self) -> bool:
        return self.custom_tag is not None

    def sort_key(self):
        # graded order; within a degree, earlier variables with higher powers first
        if self.custom_tag is not None:
            return (1, 0, (), self.custom_tag)
        return (0, self.degree, tuple(-e for e in self.exponents), "")

    def __lt__(self, other: "TermDescriptor") -> bool:
        return self.sort_key() < other.sort_key()

    def evaluate(self, Z: np.ndarray, custom: Mapping[str, Callable] | None = None) -> np.ndarray:
        """Evaluate on rows of the combined variable matrix ``Z = [X, U]``."""
        Z = np.atleast_2d(Z)
        if self.custom_tag is not None:
            if not custom or self.custom_tag not in custom:
                raise KeyError(f"no function registered for custom term {self.custom_tag!r}")
            return np.asarray(custom[self.custom_tag](Z), dtype=np.float64)
        out = np.ones(Z.shape[0])
        for k, e in enumerate(self.exponents):
            for _ in range(e):
                out = out * Z[:, k]
        return out

    def label(self, names: Sequence[str]) -> str:
        if self.custom_tag is not None:
            return self.custom_tag
        parts = []
        for name, e in zip(names, self.exponents):
            if e == 1:
                parts.append(name)
            elif e > 1:
                parts.append(f"{name}^{e}")
        return "·".join(parts) if parts else "1"

    def to_json(self):
        d = {"exponents": list(self.exponents)}
        if self.custom_tag is not None:
            d["custom_tag"] = self.custom_tag
        return d

    @classmethod
    def from_json(cls, d) -> "TermDescriptor":
        return cls(tuple(d["exponents"]), d.get("custom_tag"))


def monomial(exponents: Sequence[int]) -> TermDescriptor:
    return TermDescriptor(tuple(exponents))


@dataclass(frozen=True)
class StateModel:
    """Identified right-hand side of one state equation."""

    terms: tuple[TermDescriptor, ...]
    coef: np.ndarray
    ci: np.ndarray | None = None
    diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        terms = tuple(self.terms)
        coef = np.asarray(self.coef, dtype=np.float64).reshape(-1)
        if len(terms) != coef.shape[0]:
            raise ValueError("one coefficient per term required")
        if not np.all(np.isfinite(coef)):
            raise ValueError("coefficients must be finite")
        order = sorted(range(len(terms)), key=lambda k: terms[k].sort_key())
        terms = tuple(terms[k] for k in order)
        coef = coef[order]
        ci = self.ci
        if ci is not None:
            ci = np.asarray(ci, dtype=np.float64).reshape(-1, 2)[order]
            ci.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "ci", ci)
        object.__setattr__(self, "diagnostics", dict(self.diagnostics))

    @property
    def is_empty(self) -> bool:
        return len(self.terms) == 0

    def as_dict(self) -> dict[TermDescriptor, float]:
        return dict(zip(self.terms, self.coef.tolist()))


@dataclass(frozen=True)
class SparseModel:
    """Per-state sparse models over a shared variable set of m states and r inputs."""

    states: tuple[StateModel, ...]
    n_inputs: int
    custom: Mapping[str, Callable] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        nvar = self.n_states + self.n_inputs
        for sm in self.states:
            for term in sm.terms:
                if len(term.exponents) != nvar:
                    raise ValueError("term descriptor length must equal m + r")

    @property
    def n_states(self) -> int:
        return len(self.states)

    def term_matrix(self):
        """Union of terms, exponent matrix and (k, m) coefficient matrix."""
        terms = sorted({t for sm in self.states for t in sm.terms}, key=TermDescriptor.sort_key)
        index = {t: k for k, t in enumerate(terms)}
        C = np.zeros((len(terms), self.n_states))
        for j, sm in enumerate(self.states):
            for t, c in zip(sm.terms, sm.coef):
                C[index[t], j] = c
        return terms, C

    def rhs_function(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """Vectorised right-hand side ``f(x, u)`` for a single state/input pair."""
        terms, C = self.term_matrix()
        mono = [t for t in terms if not t.is_custom]
        cust = [t for t in terms if t.is_custom]
        E = np.array([t.exponents for t in mono], dtype=np.int64).reshape(len(mono), self.n_states + self.n_inputs)
        Cm = C[[terms.index(t) for t in mono]] if mono else np.zeros((0, self.n_states))
        Cc = C[[terms.index(t) for t in cust]] if cust else None
        custom = self.custom

        def f(x, u):
            z = np.concatenate([np.ravel(x), np.ravel(u)])
            vals = np.prod(z[None, :] ** E, axis=1) if len(mono) else np.zeros(0)
            out = vals @ Cm
            if Cc is not None:
                cv = np.array([t.evaluate(z[None, :], custom)[0] for t in cust])
                out = out + cv @ Cc
            return out

        return f

    def predict_derivatives(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        Z = np.hstack([np.atleast_2d(X), np.atleast_2d(U)])
        out = np.zeros((Z.shape[0], self.n_states))
        for j, sm in enumerate(self.states):
            for t, c in zip(sm.terms, sm.coef):
                out[:, j] += c * t.evaluate(Z, self.custom)
        return out

    def to_json(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_inputs": self.n_inputs,
            "states": [
                {
                    "terms": [t.to_json() for t in sm.terms],
                    "coef": sm.coef.tolist(),
                    "ci": None if sm.ci is None else sm.ci.tolist(),
                    "diagnostics": _jsonable(sm.diagnostics),
                }
                for sm in self.states
            ],
        }

    @classmethod
    def from_json(cls, d, custom: Mapping[str, Callable] | None = None) -> "SparseModel":
        states = []
        for s in d["states"]:
            states.append(StateModel(
                terms=tuple(TermDescriptor.from_json(t) for t in s["terms"]),
                coef=np.array(s["coef"], dtype=np.float64),
                ci=None if s.get("ci") is None else np.array(s["ci"], dtype=np.float64),
                diagnostics=s.get("diagnostics", {})))
        return cls(tuple(states), int(d["n_inputs"]), dict(custom or {}))


def save_model(model: SparseModel, path: str | os.PathLike, trace=None) -> None:
    doc = model.to_json()
    if trace is not None:
        doc["trace"] = _jsonable(trace.to_json() if hasattr(trace, "to_json") else trace)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str | os.PathLike, custom=None) -> SparseModel:
    with open(path, encoding="utf-8") as fh:
        return SparseModel.from_json(json.load(fh), custom)


def default_names(m: int, r: int) -> list[str]:
    return [f"x{i + 1}" for i in range(m)] + [f"u{i + 1}" for i in range(r)]


def render_model(model: SparseModel, names: Sequence[str] | None = None, digits: int = 3) -> str:
    """Human-readable equations, one line per state, terms in descriptor order.

    Empty state models render as ``dx/dt = 0``.
    """
    if names is None:
        names = default_names(model.n_states, model.n_inputs)
    names = list(names)
    if len(names) != model.n_states + model.n_inputs:
        raise ValueError(
            f"expected {model.n_states + model.n_inputs} names, got {len(names)}")
    lines = []
    for j, sm in enumerate(model.states):
        lhs = f"d{names[j]}/dt"
        if sm.is_empty:
            lines.append(f"{lhs} = 0")
            continue
        pieces = []
        for term, c in zip(sm.terms, sm.coef):
            mag = f"{abs(c):.{digits}f}"
            body = mag if term.is_constant else f"{mag}·{term.label(names)}"
            if not pieces:
                pieces.append(("-" if c < 0 else "") + body)
            else:
                pieces.append(("- " if c < 0 else "+ ") + body)
        lines.append(f"{lhs} = " + " ".join(pieces))
    return "\n".join(lines)
