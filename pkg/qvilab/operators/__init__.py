"""Discretization primitives: grid, interpolation, L, M and the penalty."""

from .grid import Grid, Slice, ValueField
from .interpolation import interpolate, interpolation_matrix
from .discrete import (
    InterventionStencil,
    apply_M,
    penalty,
    generator_apply,
    generator_matrix,
    central_gradient,
    difference_matrices,
    driver_values,
)

__all__ = [
    "Grid",
    "Slice",
    "ValueField",
    "interpolate",
    "interpolation_matrix",
    "InterventionStencil",
    "apply_M",
    "penalty",
    "generator_apply",
    "generator_matrix",
    "central_gradient",
    "difference_matrices",
    "driver_values",
]
