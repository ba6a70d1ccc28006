"""Quantile fused-Lasso regression and classification via linearized ADMM."""

__version__ = "0.1.0"

from .estimators import FusedLassoSignalApproximator, QuantileFusedLasso, QuantileFusedSVM
from .linops import DesignOperator, DifferenceOperator, StackedGram, power_method
from .model import (Coefficients, Dataset, DesignKind, Loss, Task, UnifiedProblem,
                    build_flsa, build_unified_classification, build_unified_regression,
                    objective, predict)
from .solver import SolveReport, SolverConfig, SolverDivergenceError, Termination, solve
from .tuning import Grid, cross_validate

__all__ = [
    "Coefficients",
    "Dataset",
    "DesignKind",
    "DesignOperator",
    "DifferenceOperator",
    "FusedLassoSignalApproximator",
    "Grid",
    "Loss",
    "QuantileFusedLasso",
    "QuantileFusedSVM",
    "SolveReport",
    "SolverConfig",
    "SolverDivergenceError",
    "StackedGram",
    "Task",
    "Termination",
    "UnifiedProblem",
    "build_flsa",
    "build_unified_classification",
    "build_unified_regression",
    "cross_validate",
    "objective",
    "power_method",
    "predict",
    "solve",
]
