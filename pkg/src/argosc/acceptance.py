"""Quantitative reproduction bounds for the benchmark tables.

Each check returns a :class:`Check`; ``reproduce`` prints one line per
check and fails when any of them does.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import SparseModel, TermDescriptor
from .evaluate import BenchmarkResult

__all__ = ["Check", "LORENZ_TRUTH", "support_error", "table1_checks", "table2_checks", "checks_for"]

RUNTIME_LIMIT = 600.0


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _m(*e) -> TermDescriptor:
    return TermDescriptor(tuple(e))


# variables (x1, x2, x3, u1)
LORENZ_TRUTH = (
    {_m(1, 0, 0, 0): -10.0, _m(0, 1, 0, 0): 10.0, _m(0, 0, 0, 1): 1.0},
    {_m(1, 0, 0, 0): 28.0, _m(0, 1, 0, 0): -1.0, _m(1, 0, 1, 0): -1.0},
    {_m(1, 1, 0, 0): 1.0, _m(0, 0, 1, 0): -8.0 / 3.0},
)


def support_error(model: SparseModel, truth: Sequence[Mapping[TermDescriptor, float]]):
    """``(supports_match, max_relative_coefficient_error)``; the error is inf on a support mismatch."""
    worst = 0.0
    for sm, want in zip(model.states, truth):
        got = sm.as_dict()
        if set(got) != set(want):
            return False, float("inf")
        for term, c in want.items():
            worst = max(worst, abs(got[term] - c) / abs(c))
    return True, worst


def _find(results, system, snr):
    for res in results:
        if res.system == system and res.snr_db == snr:
            return res
    return None


def _r2(res: BenchmarkResult, method: str) -> np.ndarray | None:
    mr = res.methods.get(method)
    return None if mr is None else mr.report.r2


def _fmt(a) -> str:
    return "[" + ", ".join(f"{v:.4f}" for v in np.asarray(a, dtype=float)) + "]"


def _argosc_bound(results, system, snr, bound, name, mse_bound=None, runtime=False) -> Check:
    res = _find(results, system, snr)
    if res is None or "argosc" not in res.methods:
        return Check(name, False, "benchmark cell missing")
    mr = res.methods["argosc"]
    r2 = mr.report.r2
    ok = bool(np.all(r2 >= bound)) and not mr.report.diverged
    detail = f"ARGOSc R2 {_fmt(r2)} (need >= {bound})"
    if mse_bound is not None:
        ok &= bool(np.all(mr.report.mse <= mse_bound))
        detail += f", MSE {_fmt(mr.report.mse)} (need <= {mse_bound})"
    if runtime:
        secs = mr.settings.get("fit_seconds", float("inf"))
        ok &= secs <= RUNTIME_LIMIT
        detail += f", fit {secs:.0f} s (need <= {RUNTIME_LIMIT:.0f} s)"
    return Check(name, ok, detail)


def _sindyc_fails(results, system, snr, name) -> Check:
    res = _find(results, system, snr)
    r2 = None if res is None else _r2(res, "sindyc")
    if r2 is None:
        return Check(name, False, "benchmark cell missing")
    return Check(name, bool(np.nanmin(r2) < 0.5), f"SINDYc R2 {_fmt(r2)} (need some state < 0.5)")


def table1_checks(results: Sequence[BenchmarkResult]) -> list[Check]:
    out = [
        _argosc_bound(results, "van_der_pol", 25.0, 0.98, "1 van der Pol 25 dB", 0.05, True),
        _argosc_bound(results, "van_der_pol", 14.0, 0.97, "2 van der Pol 14 dB"),
    ]
    for snr in (25.0, 14.0):
        out.append(_argosc_bound(results, "lotka_volterra", snr, 0.95, f"3 Lotka-Volterra {snr:g} dB ARGOSc"))
        out.append(_sindyc_fails(results, "lotka_volterra", snr, f"3 Lotka-Volterra {snr:g} dB SINDYc"))
    return out


def table2_checks(results: Sequence[BenchmarkResult]) -> list[Check]:
    out = [_argosc_bound(results, "lorenz", 49.0, 0.99, "4 Lorenz 49 dB R2")]
    res = _find(results, "lorenz", 49.0)
    if res is None or "argosc" not in res.methods:
        out.append(Check("4 Lorenz 49 dB support", False, "benchmark cell missing"))
    else:
        match, err = support_error(res.methods["argosc"].model, LORENZ_TRUTH)
        out.append(Check("4 Lorenz 49 dB support", match and err <= 0.05,
                         f"support match {match}, max relative coefficient error {err:.4g} (need <= 0.05)"))
    out.append(_argosc_bound(results, "lorenz", 37.0, 0.98, "5 Lorenz 37 dB ARGOSc"))
    out.append(_sindyc_fails(results, "lorenz", 37.0, "5 Lorenz 37 dB SINDYc"))
    if res is None or "argos" not in res.methods or "argosc" not in res.methods:
        out.append(Check("6 Lorenz 49 dB ARGOS ablation", False, "benchmark cell missing"))
    else:
        ab, full = res.methods["argos"].report, res.methods["argosc"].report
        worse = bool(np.all(np.nan_to_num(ab.r2, nan=-np.inf) < full.r2))
        out.append(Check("6 Lorenz 49 dB ARGOS ablation", worse or ab.diverged,
                         f"ARGOS R2 {_fmt(ab.r2)} vs ARGOSc {_fmt(full.r2)}, diverged {ab.diverged}"))
    return out


def checks_for(table: str, results: Sequence[BenchmarkResult]) -> list[Check]:
    if table == "table1":
        return table1_checks(results)
    if table == "table2":
        return table2_checks(results)
    raise ValueError(f"unknown table {table!r}")
