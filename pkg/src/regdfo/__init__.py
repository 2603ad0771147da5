"""Derivative-free trust-region methods for regularized nonlinear least squares."""
from .dfolsr import SolverConfig, SolveResult, solve
from .estimators import RegularizedNLSRegressor
from .regularizers import (
    BallIndicator,
    BoxIndicator,
    L1Regularizer,
    ZeroRegularizer,
    parse_regularizer,
)
from .smoothing import SmoothingConfig
from .smoothing import solve as solve_smoothed
from .testbed import NoiseModel, get_problem, list_problems

__version__ = "0.1.0"

__all__ = [
    "BallIndicator",
    "BoxIndicator",
    "L1Regularizer",
    "NoiseModel",
    "RegularizedNLSRegressor",
    "SmoothingConfig",
    "SolveResult",
    "SolverConfig",
    "ZeroRegularizer",
    "get_problem",
    "list_problems",
    "parse_regularizer",
    "solve",
    "solve_smoothed",
]
