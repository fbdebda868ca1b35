"""Residual and comparison diagnostics for solved value fields."""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import pandas as pd

from ..model.spec import DriverSpec, ProblemSpec
from ..operators.discrete import InterventionStencil, central_gradient, driver_values, generator_matrix
from ..operators.grid import Grid, ValueField

logger = logging.getLogger(__name__)

ORDER_TOL = 1e-8


@dataclass
class Residuals:
    """
    Discrete min{v - h, max{v - Mv, -v_t - Lv - f}} on time indices 1..N_t.

    Attributes:
        grid: Grid of the field
        values: Residual per time index 1..N_t and node, shape (N_t, size)
        lower_part: v - h on the same index set
        upper_part: max{v - Mv, -v_t - Lv - f}
        mask: Nodes that enter the norms
    """
    grid: Grid
    values: np.ndarray
    lower_part: np.ndarray
    upper_part: np.ndarray
    mask: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[1:]

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values[:, self.mask])))

    @property
    def l2(self) -> float:
        """Discrete L2 norm over the masked space-time nodes."""
        cell = self.grid.dt * self.grid.dx ** self.grid.dimension
        return float(np.sqrt(cell * np.sum(self.values[:, self.mask] ** 2)))

    @property
    def minimum(self) -> float:
        return float(np.min(self.values[:, self.mask]))

    def argmin(self) -> Dict[str, float]:
        """Time and state of the most negative masked residual."""
        masked = np.where(self.mask[None, :], self.values, np.inf)
        k, i = np.unravel_index(int(np.argmin(masked)), masked.shape)
        out = {"t": float(self.times[k])}
        out.update({f"x{j + 1}": float(self.grid.points[i, j]) for j in range(self.grid.dimension)})
        return out

    def summary(self) -> Dict[str, float]:
        return {"sup": self.sup, "l2": self.l2, "min": self.minimum,
                "nodes": int(self.mask.sum()), "time_levels": self.values.shape[0]}

    def to_frame(self) -> pd.DataFrame:
        """Columns t, x1[, x2], residual for the masked nodes."""
        points = self.grid.points[self.mask]
        n_t = self.values.shape[0]
        data = {"t": np.repeat(self.times, points.shape[0])}
        for j in range(self.grid.dimension):
            data[f"x{j + 1}"] = np.tile(points[:, j], n_t)
        data["residual"] = self.values[:, self.mask].reshape(-1)
        return pd.DataFrame(data)


def residual_qvi(field: ValueField, spec: ProblemSpec, grid: Grid, driver: DriverSpec,
                 radius: Optional[float] = None) -> Residuals:
    """
    Evaluate the discrete QVI expression of a complete field.

    At time index k (1..N_t) the time derivative is the backward difference
    -v_t(t_k) ~ (v_{k-1} - v_k) / dt; L, M and the driver are taken at t_k on
    slice k. A LOCAL_PLUS_K_M driver reads its non-local term from the same
    slice.

    Args:
        field: Complete value field on ``grid``
        spec: Problem instance
        grid: Grid of the field
        driver: Driver in any mode
        radius: Restrict the norms to interior nodes with max-norm <= radius

    Returns:
        Residuals on time indices 1..N_t
    """
    field.grid.check_same(grid)
    if not field.complete:
        raise ValueError("residual_qvi needs a complete field")
    if driver.frozen is not None:
        driver.frozen.grid.check_same(grid)

    points = grid.points
    steps = grid.time_steps
    lower = np.empty((steps, grid.size))
    upper = np.empty((steps, grid.size))
    for k in range(1, steps + 1):
        t = grid.time(k)
        v = field.values[k]
        stencil = InterventionStencil.build(spec, grid, t)
        pde = ((field.values[k - 1] - v) / grid.dt
               - generator_matrix(t, spec, grid) @ v
               - driver_values(driver, t, k, v, spec, grid, stencil))
        lower[k - 1] = v - spec.obstacle_at(t, points)
        upper[k - 1] = np.maximum(v - stencil.apply_M(v), pde)

    res = Residuals(grid, np.minimum(lower, upper), lower, upper, grid.interior_mask(radius))
    logger.info("residual label=%s sup=%.3g l2=%.3g", field.label, res.sup, res.l2)
    return res


@dataclass(frozen=True)
class SupersolutionCheck:
    """Outcome of the perturbed supersolution test."""
    passed: bool
    min_residual: float
    tolerance: float
    varpi: float
    varpi_threshold: float
    witness: Dict[str, float]

    @property
    def above_threshold(self) -> bool:
        return self.varpi > self.varpi_threshold


def _perturbation(grid: Grid, spec: ProblemSpec, varrho: float) -> np.ndarray:
    r = np.linalg.norm(grid.points, axis=1)
    return 1.0 + np.maximum(r - spec.k_gamma, 0.0) ** (2.0 * varrho + 2.0)


def varpi_threshold(spec: ProblemSpec, grid: Grid, driver: DriverSpec, varrho: float) -> float:
    """
    Smallest decay rate for which the perturbation is a strict supersolution
    of the linearized equation on the grid.

    Bounds (L phi + k_f (phi + |sigma^T grad phi|) + |k| phi) / phi over the
    nodes and times of the grid.
    """
    phi = _perturbation(grid, spec, varrho)
    grad = central_gradient(phi, grid)
    k_f = spec.lipschitz.k_f
    worst = 0.0
    for t in grid.times:
        sig = spec.sigma_at(t, grid.points)
        z = np.linalg.norm(np.einsum("nji,nj->ni", sig, grad), axis=1)
        growth = generator_matrix(t, spec, grid) @ phi + k_f * (phi + z) + abs(driver.k) * phi
        worst = max(worst, float(np.max(growth / phi)))
    return worst


def perturbed_supersolution_check(field: ValueField, theta_p: float, varpi: float, varrho: float,
                                  spec: ProblemSpec, grid: Grid, driver: DriverSpec,
                                  tol: Optional[float] = None,
                                  radius: Optional[float] = None) -> SupersolutionCheck:
    """
    Check that w = v + theta_p e^{-varpi t}(1 + ((|x| - K_Gamma)^+)^{2 varrho + 2})
    has residual >= -tol at every interior node.

    Args:
        field: Solved field
        theta_p: Perturbation size (>= 0; 0 reproduces residual_qvi)
        varpi: Time decay rate of the perturbation
        varrho: Growth exponent of the perturbation
        tol: Allowed negative residual (default 10 (dt + dx^2))
        radius: Optional inner radius, as in residual_qvi

    Returns:
        SupersolutionCheck with the minimum residual and its location
    """
    if theta_p < 0:
        raise ValueError("theta_p must be non-negative")
    if varpi < 0:
        raise ValueError("varpi must be non-negative")
    if tol is None:
        tol = 10.0 * (grid.dt + grid.dx ** 2)

    phi = _perturbation(grid, spec, varrho)
    decay = np.exp(-varpi * grid.times)
    w = ValueField(grid, field.values + theta_p * decay[:, None] * phi[None, :], label=f"{field.label}+phi")
    res = residual_qvi(w, spec, grid, driver, radius)
    threshold = varpi_threshold(spec, grid, driver, varrho)
    check = SupersolutionCheck(
        passed=res.minimum >= -tol,
        min_residual=res.minimum,
        tolerance=tol,
        varpi=varpi,
        varpi_threshold=threshold,
        witness=res.argmin(),
    )
    if varpi <= threshold:
        logger.warning("varpi=%g is not above the model threshold %.4g", varpi, threshold)
    return check


@dataclass(frozen=True)
class FieldComparison:
    """Nodewise ordering statistics of field1 <= field2."""
    max_difference: float
    violation_fraction: float
    tolerance: float = ORDER_TOL

    @property
    def passed(self) -> bool:
        return self.violation_fraction == 0.0


def compare_fields(field1: ValueField, field2: ValueField, tol: float = ORDER_TOL) -> FieldComparison:
    """max(field1 - field2) and the fraction of nodes where field1 > field2 + tol."""
    field1.grid.check_same(field2.grid)
    diff = field1.values - field2.values
    return FieldComparison(
        max_difference=float(np.max(diff)),
        violation_fraction=float(np.mean(diff > tol)),
        tolerance=tol,
    )
