"""Picard iteration for non-local drivers."""

from .picard import IterationTrace, picard_solve, fixed_point_residual, print_trace

__all__ = [
    "IterationTrace",
    "picard_solve",
    "fixed_point_residual",
    "print_trace",
]
