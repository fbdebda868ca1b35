"""Monte Carlo verification: forward paths, consistency estimators, domination and oracles."""

from .events import EventType, Event, SegmentEvent, JumpEvent, StepEvent
from .observers import PathObserver
from .paths import (
    EstimateCI,
    PathBundle,
    MomentStability,
    simulate_forward,
    moment_check,
    moment_stability,
)
from .consistency import StopRule, DualGap, pathwise_consistency, dual_gap
from .domination import (
    DominationTrace,
    DominationObserver,
    DominationResult,
    fit_growth_constant,
    domination_check,
)
from .binomial import binomial_oracle

__all__ = [
    "EventType",
    "Event",
    "SegmentEvent",
    "JumpEvent",
    "StepEvent",
    "PathObserver",
    "EstimateCI",
    "PathBundle",
    "MomentStability",
    "simulate_forward",
    "moment_check",
    "moment_stability",
    "StopRule",
    "DualGap",
    "pathwise_consistency",
    "dual_gap",
    "DominationTrace",
    "DominationObserver",
    "DominationResult",
    "fit_growth_constant",
    "domination_check",
    "binomial_oracle",
]
