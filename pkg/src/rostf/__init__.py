"""Robust optimization-based spatiotemporal fusion of satellite images."""

__version__ = "0.1.0"

from .fusion import (
    FusionInput,
    FusionOutput,
    RostfParams,
    build_problem,
    constraint_residuals,
    default_params,
    fuse,
)
from .metrics import MetricsReport, cc, evaluate, mssim, rmse, sam
from .pipeline import run_case
from .ppds import ProblemGraph, SolverState, StoppingRule, compute_stepsizes
from .raster import MultiBandImage, read_raster, write_raster
from .simulate import CaseConfig, FixtureSpec, make_fixture, make_lr

__all__ = [
    "CaseConfig",
    "FixtureSpec",
    "FusionInput",
    "FusionOutput",
    "MetricsReport",
    "MultiBandImage",
    "ProblemGraph",
    "RostfParams",
    "SolverState",
    "StoppingRule",
    "build_problem",
    "cc",
    "compute_stepsizes",
    "constraint_residuals",
    "default_params",
    "evaluate",
    "fuse",
    "make_fixture",
    "make_lr",
    "mssim",
    "read_raster",
    "rmse",
    "run_case",
    "sam",
    "write_raster",
]
