"""Solver configuration."""

from dataclasses import dataclass


@dataclass(frozen=True)
class SolveConfig:
    """
    Settings of the backward theta-scheme.

    Attributes:
        theta: Implicitness of the diffusion step (1 = fully implicit)
        inner_tol: Stop the inner loop when successive iterates differ by at most this
        inner_max: Inner iteration budget per time step
        damping: Relaxation factor of the inner loop, in (0, 1]
        penalty_n: Penalty level n (penalized scheme only)
    """
    theta: float = 1.0
    inner_tol: float = 1e-10
    inner_max: int = 500
    damping: float = 1.0
    penalty_n: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.inner_tol <= 0:
            raise ValueError("inner_tol must be positive")
        if self.inner_max < 1:
            raise ValueError("inner_max must be at least 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.penalty_n < 0:
            raise ValueError("penalty_n must be non-negative")
