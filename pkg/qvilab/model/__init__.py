"""Problem instances and assumption validators."""

from .spec import (
    MarkSpace,
    CoefficientSet,
    LipschitzConstants,
    ProblemSpec,
    DriverSpec,
    constant,
)
from .validation import (
    CheckResult,
    ValidationReport,
    SamplePoints,
    LipschitzPairs,
    validate_static,
    check_no_free_loop,
    estimate_lipschitz,
)

__all__ = [
    "MarkSpace",
    "CoefficientSet",
    "LipschitzConstants",
    "ProblemSpec",
    "DriverSpec",
    "constant",
    "CheckResult",
    "ValidationReport",
    "SamplePoints",
    "LipschitzPairs",
    "validate_static",
    "check_no_free_loop",
    "estimate_lipschitz",
]
