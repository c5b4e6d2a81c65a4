"""Command-line front end: ``simulate``, ``fit``, ``evaluate`` and ``reproduce``.

Exit codes: 0 success, 1 invalid input, 2 runtime or numerical failure,
3 a reproduction bound failed (``reproduce`` only). ``ARGOSC_WORKERS`` sets
how many benchmark cells ``reproduce`` runs in parallel.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import acceptance
from .data import DatasetError, load_dataset, load_model, render_model, save_dataset, save_model
from .evaluate import (BenchmarkResult, MethodResult, run_benchmark, table_rows, validate,
                       write_table, write_trajectories)
from .pipeline import DEFAULT_ETA, PipelineConfig, fit_argosc
from .simulate import BenchmarkConfig, ForcingLaw, add_noise, integrate, make_system, split
from .sindyc import THRESHOLD_GRID, StlsConfig, fit_sindyc
from .smoothing import SGParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ExperimentSpec", "SpecError", "load_spec", "main", "TABLES"]

log = logging.getLogger("argosc")

TABLES = {"table1": ("van_der_pol.toml", "lotka_volterra.toml"), "table2": ("lorenz.toml",)}

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_ACCEPTANCE = 0, 1, 2, 3


class SpecError(ValueError):
    pass


_SECTIONS = {
    "experiment": {"name", "seed", "snr_db", "methods", "out_dir"},
    "system": None,  # name plus the system's own parameters, checked by the factory
    "forcing": None,  # kind plus its parameters, checked by ForcingLaw
    "simulation": {"x0", "t_end", "dt", "train_seconds"},
    "pipeline": {"degree", "penalty", "B", "alpha", "folds", "eta_grid",
                 "sg_selection", "sg_window", "sg_poly_order"},
    "sindyc": {"thresholds", "threshold", "differentiation", "max_iter"},
}


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    seed: int
    snr_db: tuple[float | None, ...]
    methods: tuple[str, ...]
    out_dir: str
    benchmarks: tuple[BenchmarkConfig, ...]
    pipeline: PipelineConfig
    stls: StlsConfig
    thresholds: tuple[float, ...]

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return replace(self, seed=seed, pipeline=replace(self.pipeline, seed=seed),
                       benchmarks=tuple(replace(b, seed=seed) for b in self.benchmarks))


def _check_keys(doc: dict):
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise SpecError(f"unknown section(s): {sorted(unknown)}")
    for sec, allowed in _SECTIONS.items():
        body = doc.get(sec, {})
        if not isinstance(body, dict):
            raise SpecError(f"[{sec}] must be a table")
        if allowed is not None:
            extra = set(body) - allowed
            if extra:
                raise SpecError(f"unknown key(s) in [{sec}]: {sorted(extra)}")


def _snr(v) -> float | None:
    if isinstance(v, str) and v.lower() in ("inf", "none", "clean"):
        return None
    v = float(v)
    return None if math.isinf(v) and v > 0 else v


def parse_spec(doc: dict) -> ExperimentSpec:
    """Validate a parsed spec document and build the configs it describes."""
    _check_keys(doc)
    exp = doc.get("experiment", {})
    sysd = dict(doc.get("system", {}))
    if "name" not in sysd:
        raise SpecError("[system] needs a name")
    try:
        system = make_system(sysd.pop("name"), **sysd)
        ford = dict(doc.get("forcing", {}))
        forcing = ForcingLaw(ford.pop("kind"), ford) if ford else None
        seed = int(exp.get("seed", 0))
        snrs = tuple(_snr(v) for v in exp.get("snr_db", [None]))
        methods = tuple(exp.get("methods", ["argosc"]))
        bad = set(methods) - {"argosc", "argos", "sindyc"}
        if bad:
            raise SpecError(f"unknown method(s): {sorted(bad)}")
        sim = doc.get("simulation", {})
        benches = tuple(
            BenchmarkConfig(system, forcing, sim.get("x0"), float(sim.get("t_end", 30.0)),
                            float(sim.get("dt", 0.001)), snr, seed,
                            float(sim.get("train_seconds", 10.0)))
            for snr in snrs)
        pl = doc.get("pipeline", {})
        selection = pl.get("sg_selection", "auto")
        sg = SGParams(int(pl.get("sg_window", 0 if selection == "auto" else -1)),
                      int(pl.get("sg_poly_order", 4)), selection)
        pipeline = PipelineConfig(
            degree=int(pl.get("degree", 5)), penalty=pl.get("penalty", "adaptive_lasso"),
            eta_grid=tuple(pl.get("eta_grid", DEFAULT_ETA)), B=int(pl.get("B", 2000)),
            alpha=float(pl.get("alpha", 0.05)), sg=sg, seed=seed, folds=int(pl.get("folds", 10)))
        sc = doc.get("sindyc", {})
        thresholds = tuple(float(v) for v in sc.get("thresholds", THRESHOLD_GRID))
        stls = StlsConfig(float(sc.get("threshold", 0.1)), int(sc.get("max_iter", 20)),
                          pipeline.degree, sc.get("differentiation", "sg"), sg)
    except SpecError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(str(exc)) from exc
    if not thresholds:
        raise SpecError("sindyc thresholds must not be empty")
    return ExperimentSpec(str(exp.get("name", system.name)), seed, snrs, methods,
                          str(exp.get("out_dir", "results")), benches, pipeline, stls, thresholds)


def load_spec(path) -> ExperimentSpec:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from exc
    return parse_spec(doc)


def builtin_spec(filename: str) -> ExperimentSpec:
    with resources.as_file(resources.files("argosc") / "specs" / filename) as p:
        return load_spec(p)


def _snr_tag(snr) -> str:
    return "clean" if snr is None else f"{snr:g}dB"


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    out = Path(args.out or spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for bench in spec.benchmarks:
            clean = integrate(bench)
            ds = add_noise(clean, math.inf if bench.snr_db is None else bench.snr_db, bench.seed)
            path = out / f"{spec.name}_{_snr_tag(bench.snr_db)}.csv"
            written.append(path)
            save_dataset(ds, path)
            noise = ds.X - ds.truth
            with np.errstate(divide="ignore"):
                achieved = 10 * np.log10(np.mean(ds.truth ** 2, axis=0) / np.mean(noise ** 2, axis=0))
            print(f"{path}: n={ds.n} m={ds.m} r={ds.r} snr_db={bench.snr_db} "
                  f"achieved={np.round(achieved, 2).tolist()}")
    except BaseException:
        for p in written:
            for q in (p, Path(str(p) + ".meta.json")):
                q.unlink(missing_ok=True)
        raise
    return EXIT_OK


def _train_rows(ds, train_seconds):
    if train_seconds is None or ds.t[-1] - ds.t[0] <= train_seconds:
        return ds, None
    return split(ds, train_seconds)


def cmd_fit(args) -> int:
    ds = load_dataset(args.dataset)
    spec = load_spec(args.spec) if args.spec else None
    pipeline = spec.pipeline if spec else PipelineConfig()
    stls = spec.stls if spec else StlsConfig()
    if args.seed is not None:
        pipeline = replace(pipeline, seed=args.seed)
    if args.bootstrap is not None:
        pipeline = replace(pipeline, B=args.bootstrap)
    train_seconds = args.train_seconds
    if train_seconds is None:
        train_seconds = ds.meta.get("train_seconds",
                                    spec.benchmarks[0].train_seconds if spec else None)
    train, _ = _train_rows(ds, train_seconds)
    trace = None
    if args.method == "sindyc":
        model = fit_sindyc(train, stls)
    else:
        model, trace = fit_argosc(train, replace(pipeline, include_inputs=args.method == "argosc"))
    save_model(model, args.out)
    if args.trace:
        tmp = Path(str(args.trace) + ".tmp")
        tmp.write_text(json.dumps(trace.to_json() if trace else None, indent=1))
        os.replace(tmp, args.trace)
    print(render_model(model))
    return EXIT_OK


def _forcing_from_meta(meta) -> ForcingLaw | None:
    d = dict(meta.get("forcing") or {})
    if not d or d.get("kind") in (None, "custom"):
        return None
    return ForcingLaw(d.pop("kind"), d)


def cmd_evaluate(args) -> int:
    ds = load_dataset(args.dataset)
    model = load_model(args.model)
    if ds.truth is None:
        raise DatasetError("evaluation needs a dataset with true_x columns")
    train_seconds = args.train_seconds if args.train_seconds is not None else ds.meta.get("train_seconds")
    _, val = _train_rows(ds, train_seconds)
    val = val if val is not None else ds
    report, X = validate(model, val, _forcing_from_meta(ds.meta))
    label = args.method or "model"
    res = BenchmarkResult(ds.meta.get("system", "unknown"), ds.meta.get("snr_db"), val.t, val.truth,
                          {label: MethodResult(label, model, report, X)})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_table(table_rows([res]), out)
    write_trajectories(res, out.with_name(out.stem + "_trajectory.csv"))
    for j, (mse, r2) in enumerate(zip(report.mse, report.r2)):
        print(f"x{j + 1}: MSE={mse:.6g} R2={r2:.6g}")
    if report.diverged:
        print(f"diverged at t={report.divergence_time:g}")
    return EXIT_OK


def _run_cell(job):
    spec, bench = job
    return run_benchmark(bench, spec.pipeline, spec.methods, spec.stls, spec.thresholds)


def _workers() -> int:
    raw = os.environ.get("ARGOSC_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise SpecError(f"ARGOSC_WORKERS must be an integer, got {raw!r}") from None
    if n < 1:
        raise SpecError("ARGOSC_WORKERS must be >= 1")
    return n


def reproduce(table: str, out_dir, seed: int | None = None, bootstrap: int | None = None,
              workers: int = 1):
    """Run every benchmark cell of `table`; write tables, trajectories and models.

    Returns ``(results, checks)``.
    """
    if table not in TABLES:
        raise SpecError(f"unknown table {table!r}; choose from {sorted(TABLES)}")
    jobs = []
    for fname in TABLES[table]:
        spec = builtin_spec(fname)
        if seed is not None:
            spec = spec.with_seed(seed)
        if bootstrap is not None:
            spec = replace(spec, pipeline=replace(spec.pipeline, B=bootstrap))
        jobs += [(spec, b) for b in spec.benchmarks]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(table_rows(results), out / f"{table}.csv")
    for res in results:
        stem = f"{res.system}_{_snr_tag(res.snr_db)}"
        write_trajectories(res, out / f"{stem}_trajectories.csv")
        for method, mr in res.methods.items():
            save_model(mr.model, out / f"{stem}_{method}.json")
    return results, acceptance.checks_for(table, results)


def cmd_reproduce(args) -> int:
    results, checks = reproduce(args.table, args.out, args.seed, args.bootstrap, _workers())
    for res in results:
        for method, mr in res.methods.items():
            print(f"{res.system} {_snr_tag(res.snr_db)} {method}: R2={np.round(mr.report.r2, 4).tolist()}"
                  f" MSE={np.round(mr.report.mse, 4).tolist()}"
                  + (f" diverged at t={mr.report.divergence_time:g}" if mr.report.diverged else ""))
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="argosc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write noisy benchmark datasets, one per SNR")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", help="output directory (default: out_dir from the spec file)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="identify a model from a dataset")
    f.add_argument("--dataset", required=True)
    f.add_argument("--spec", help="take pipeline/STLS settings from this spec")
    f.add_argument("--method", choices=("argosc", "argos", "sindyc"), default="argosc")
    f.add_argument("--out", required=True, help="model file (JSON)")
    f.add_argument("--trace", help="also write the selection trace here (JSON)")
    f.add_argument("--seed", type=int)
    f.add_argument("--bootstrap", type=int, help="override the number of bootstrap replicates")
    f.add_argument("--train-seconds", type=float, help="fit on the first T seconds only")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("evaluate", help="simulate a model over the validation part of a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--out", required=True, help="result table (CSV); trajectories go next to it")
    e.add_argument("--method", help="label for the table rows (default: model)")
    e.add_argument("--train-seconds", type=float)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("reproduce", help="run the benchmark tables end to end")
    r.add_argument("table", choices=sorted(TABLES))
    r.add_argument("--out", default="results")
    r.add_argument("--seed", type=int, help="override every spec's seed")
    r.add_argument("--bootstrap", type=int, help="override the number of bootstrap replicates")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SpecError, DatasetError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # numerical or other runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
