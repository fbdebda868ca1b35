"""Backward solvers for the penalized and double-obstacle problems."""

from .config import SolveConfig
from .stepper import TimeStepper
from .steppers import PenalizedStepper, DoubleObstacleStepper, step_penalized, step_double
from .engine import BackwardSolver, solve_penalized, solve_double, terminal_gaps
from .diagnostics import (
    Residuals,
    SupersolutionCheck,
    FieldComparison,
    residual_qvi,
    varpi_threshold,
    perturbed_supersolution_check,
    compare_fields,
)

__all__ = [
    "SolveConfig",
    "TimeStepper",
    "PenalizedStepper",
    "DoubleObstacleStepper",
    "step_penalized",
    "step_double",
    "BackwardSolver",
    "solve_penalized",
    "solve_double",
    "terminal_gaps",
    "Residuals",
    "SupersolutionCheck",
    "FieldComparison",
    "residual_qvi",
    "varpi_threshold",
    "perturbed_supersolution_check",
    "compare_fields",
]
