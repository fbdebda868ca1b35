"""Penalized and double-obstacle time steppers."""

import logging
from typing import Optional

import numpy as np
from scipy.sparse.linalg import splu

from ..core.errors import StepConvergenceError
from ..model.spec import DriverSpec, ProblemSpec
from ..operators.discrete import InterventionStencil, driver_values
from ..operators.grid import Grid, Slice
from .config import SolveConfig
from .stepper import TimeStepper

logger = logging.getLogger(__name__)

# dt * n * sum(lambda) of the penalty standing in for n -> infinity
LIMIT_STIFFNESS = 1e6


class PenalizedStepper(TimeStepper):
    """
    Theta-scheme for -v_t - Lv + K^n v - f~ = 0 followed by projection on h.

    The inner loop lags the driver and the active set of the penalty; the
    penalty values themselves are taken implicitly on that active set, so a
    converged iterate solves the nonlinear penalized step exactly.
    """

    def step(self, next_slice: Slice, k: int) -> Slice:
        w, m = self.upper_solve(next_slice, k, self.cfg.penalty_n, "penalized")
        self.last_iterations = m
        logger.debug("penalized step k=%d n=%g iterations=%d", k, self.cfg.penalty_n, m)
        return Slice(self.grid, np.maximum(w, self.obstacle(k)), self.grid.time(k))

    def upper_solve(self, next_slice: Slice, k: int, n: float, label: str,
                    stencil: Optional[InterventionStencil] = None):
        """
        Solve (A + dt n B_S) w = base + dt f(w) + dt n c_S with S the active set of w.

        Returns:
            (w, iterations) before the lower obstacle is applied
        """
        grid = self.grid
        cfg = self.cfg
        dt = grid.dt
        t = grid.time(k)

        A, base = self.system(next_slice.values, k)
        if stencil is None:
            stencil = self.stencil(k)
        plain = splu(A)
        lu, key, shift = plain, None, 0.0

        w = next_slice.values.copy()
        delta = np.inf
        for m in range(1, cfg.inner_max + 1):
            rhs = base + dt * driver_values(self.driver, t, k, w, self.spec, grid, stencil)
            if n > 0:
                active = stencil.active(w)
                if not active.any():
                    lu, key, shift = plain, None, 0.0
                elif key != active.tobytes():
                    B, c = stencil.linearization(active)
                    lu = splu((A + dt * n * B).tocsc())
                    key, shift = active.tobytes(), dt * n * c
                rhs = rhs + shift
            target = lu.solve(rhs)
            delta = float(np.max(np.abs(target - w)))
            if delta <= cfg.inner_tol:
                return target, m
            w = w + cfg.damping * (target - w)
        raise StepConvergenceError(
            f"{label} step at t={t:.6g} missed inner_tol={cfg.inner_tol:g} "
            f"after {cfg.inner_max} iterations (last difference {delta:.3g}); "
            "try a smaller dt or more damping",
            t, cfg.inner_max, delta,
        )


class DoubleObstacleStepper(PenalizedStepper):
    """
    Double-obstacle step as the n -> infinity limit of the penalized step.

    The upper obstacle is solved implicitly on the same matrix A: the nodes
    with w > Mw carry a penalty of stiffness LIMIT_STIFFNESS, so the active
    set iteration pins them to Mw. The residual excess of order
    1 / LIMIT_STIFFNESS is removed by w <- min(w, Mw), which only lowers w,
    and the lower obstacle is applied by projection as in the penalized step.
    Each stage is monotone, so the result lies below the penalized step at
    every finite n.
    """

    def step(self, next_slice: Slice, k: int) -> Slice:
        grid = self.grid
        cfg = self.cfg
        t = grid.time(k)
        stencil = self.stencil(k)

        total = float(np.sum(stencil.weights)) or 1.0
        n = LIMIT_STIFFNESS / (grid.dt * total)
        w, inner = self.upper_solve(next_slice, k, n, "double-obstacle", stencil)

        excess = np.inf
        for m in range(1, cfg.inner_max + 1):
            bound = stencil.apply_M(w)
            excess = float(np.max(w - bound))
            if excess <= cfg.inner_tol:
                break
            w = np.minimum(w, bound)
        else:
            raise StepConvergenceError(
                f"double-obstacle step at t={t:.6g} did not settle below the intervention "
                f"operator within {cfg.inner_max} iterations (last excess {excess:.3g}); the "
                "intervention operator may cycle at no cost, run check_no_free_loop on this model",
                t, cfg.inner_max, excess,
            )
        self.last_iterations = inner + m - 1
        logger.debug("double step k=%d iterations=%d trims=%d", k, inner, m - 1)
        return Slice(grid, np.maximum(w, self.obstacle(k)), t)


def step_penalized(next_slice: Slice, t: float, spec: ProblemSpec, grid: Grid,
                   cfg: SolveConfig, driver: DriverSpec) -> Slice:
    """One backward penalized step ending at ``next_slice`` and producing time ``t``."""
    return PenalizedStepper(spec, grid, cfg, driver).step(next_slice, _index_of(grid, t))


def step_double(next_slice: Slice, t: float, spec: ProblemSpec, grid: Grid,
                cfg: SolveConfig, driver: DriverSpec) -> Slice:
    """One backward double-obstacle step ending at ``next_slice`` and producing time ``t``."""
    return DoubleObstacleStepper(spec, grid, cfg, driver).step(next_slice, _index_of(grid, t))


def _index_of(grid: Grid, t: float) -> int:
    k = int(round(t / grid.dt))
    if not 0 <= k < grid.time_steps or abs(k * grid.dt - t) > 1e-9 * max(1.0, grid.horizon):
        raise ValueError(f"t={t} is not a step time of the grid before the horizon")
    return k
