"""Sparse identification of forced nonlinear dynamics (ARGOSc) with a SINDYc baseline."""
from .data import (SparseModel, StateModel, TermDescriptor, TimeSeriesDataset, load_dataset,
                   load_model, render_model, save_dataset, save_model)
from .evaluate import run_benchmark, score, simulate_model, validate
from .features import LibrarySpec, build_design_matrix
from .pipeline import PipelineConfig, fit_argosc
from .simulate import (BenchmarkConfig, ForcingLaw, add_noise, integrate, lorenz, lotka_volterra, make_system,
                       split, van_der_pol)
from .sindyc import StlsConfig, fit_sindyc
from .smoothing import SGParams, smooth_and_differentiate

__version__ = "0.1.0"

__all__ = [
    "BenchmarkConfig", "ForcingLaw", "LibrarySpec", "PipelineConfig", "SGParams", "SparseModel",
    "StateModel", "StlsConfig", "TermDescriptor", "TimeSeriesDataset", "add_noise",
    "build_design_matrix", "fit_argosc", "fit_sindyc", "integrate", "load_dataset", "load_model",
    "lorenz", "lotka_volterra", "make_system", "render_model", "run_benchmark", "save_dataset", "save_model", "score",
    "simulate_model", "smooth_and_differentiate", "split", "validate", "van_der_pol",
]
