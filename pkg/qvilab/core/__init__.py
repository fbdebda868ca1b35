"""Core enums, errors and settings used throughout the lab."""

from .types import DriverMode, SchemeMode, CheckStatus, StopRuleKind, EstimatorForm
from .errors import (
    QVIError,
    StepConvergenceError,
    PicardDivergenceError,
    LoopBudgetError,
    GridMismatchError,
    PathExclusionError,
    ConfigError,
    DimensionMismatchError,
    ExprSyntaxError,
    UnknownIdentifierError,
    ExprEvalError,
)
from .settings import Settings, get_settings

__all__ = [
    "DriverMode",
    "SchemeMode",
    "CheckStatus",
    "StopRuleKind",
    "EstimatorForm",
    "QVIError",
    "StepConvergenceError",
    "PicardDivergenceError",
    "LoopBudgetError",
    "GridMismatchError",
    "PathExclusionError",
    "ConfigError",
    "DimensionMismatchError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ExprEvalError",
    "Settings",
    "get_settings",
]
