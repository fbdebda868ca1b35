"""Core enumerations shared across the solver lab."""

from enum import Enum


class DriverMode(Enum):
    """How the driver reads the value function."""
    LOCAL = "local"
    LOCAL_PLUS_K_M = "local_plus_k_m"
    FROZEN = "frozen"


class SchemeMode(Enum):
    """Backward scheme used to produce a value field."""
    PENALIZED = "penalized"
    DOUBLE = "double"


class CheckStatus(Enum):
    """Outcome of a single assumption check."""
    PASS = "pass"
    FAIL = "fail"
    ERROR = "error"

    @property
    def severity(self) -> int:
        """Ordering used when merging reports (higher is worse)."""
        return {"pass": 0, "fail": 1, "error": 2}[self.value]


class StopRuleKind(Enum):
    """Stopping rule used by the pathwise estimator."""
    HIT_H = "hit_h"
    FIXED_T = "fixed_t"


class EstimatorForm(Enum):
    """Which jump terms the pathwise estimator keeps."""
    PATHWISE = "pathwise"  # realized jump sum
    COMPENSATED = "compensated"  # lambda-weighted integral
