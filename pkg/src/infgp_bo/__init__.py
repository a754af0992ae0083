"""Bayesian optimization with an infinite mixture of Gaussian-process surfaces."""

from .acquisition import (
    AcquisitionConfig,
    OptimizerConfig,
    PosteriorDraw,
    PredictiveMixture,
    build_predictive,
    optimize,
    sample_path,
    ts_step,
)
from .benchmarks import Objective, RegretTrace, make_objective
from .config import ExperimentConfig, load_config, parse_text
from .errors import (
    ChainDivergence,
    ConfigError,
    DegenerateWeights,
    DimensionMismatch,
    FactorizationFailure,
    InfGPError,
    InvalidParameter,
    OutOfBounds,
)
from .gp import KernelParams, baseline_gp_fit, kriging
from .history import ObservationHistory
from .infgp import GibbsConfig, GibbsState, PriorSpec, run_gibbs, truncation_level
from .harness import RunSummary, export_surface_weights, run_experiment

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "ChainDivergence",
    "ConfigError",
    "DegenerateWeights",
    "DimensionMismatch",
    "ExperimentConfig",
    "FactorizationFailure",
    "GibbsConfig",
    "GibbsState",
    "InfGPError",
    "InvalidParameter",
    "KernelParams",
    "Objective",
    "ObservationHistory",
    "OptimizerConfig",
    "OutOfBounds",
    "PosteriorDraw",
    "PredictiveMixture",
    "PriorSpec",
    "RegretTrace",
    "RunSummary",
    "baseline_gp_fit",
    "build_predictive",
    "export_surface_weights",
    "kriging",
    "load_config",
    "make_objective",
    "optimize",
    "parse_text",
    "run_experiment",
    "run_gibbs",
    "sample_path",
    "truncation_level",
    "ts_step",
]
