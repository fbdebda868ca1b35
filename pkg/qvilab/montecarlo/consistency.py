"""Probabilistic cross-checks of solved fields: pathwise consistency and dual gaps."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..core.errors import PathExclusionError
from ..core.types import DriverMode, EstimatorForm, StopRuleKind
from ..model.spec import DriverSpec, ProblemSpec
from ..operators.grid import Grid, ValueField
from ..solver.config import SolveConfig
from ..solver.engine import solve_double, solve_penalized
from .paths import EstimateCI, PathBundle

logger = logging.getLogger(__name__)

MAX_EXCLUDED = 0.05
ORDER_TOL = 1e-8


@dataclass(frozen=True)
class StopRule:
    """HIT_H(epsilon): stop once v <= h + epsilon; FIXED_T: run to the horizon."""
    kind: StopRuleKind
    epsilon: float = 0.0

    @classmethod
    def hit_h(cls, epsilon: float) -> "StopRule":
        if epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        return cls(StopRuleKind.HIT_H, epsilon)

    @classmethod
    def fixed_t(cls) -> "StopRule":
        return cls(StopRuleKind.FIXED_T)


def _jump_gaps(field: ValueField, spec: ProblemSpec, s: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """V(e_i) = v(s, x + gamma(s, x, e_i)) - v(s, x) per mark, shape (marks, m)."""
    return np.vstack([field.evaluate(s, x + spec.jump_at(s, x, e)) - y for e in spec.marks.nodes])


def _costs(spec: ProblemSpec, s: float, x: np.ndarray) -> np.ndarray:
    return np.vstack([spec.cost_at(s, x, e) for e in spec.marks.nodes])


def _non_local_term(driver: DriverSpec, field: ValueField, spec: ProblemSpec, s: float,
                    x: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """k (Mg)(s, x) along paths; g is the frozen field or the solved field itself."""
    if driver.mode is DriverMode.LOCAL or driver.k == 0.0:
        return np.zeros(x.shape[0])
    g = driver.frozen if driver.mode is DriverMode.FROZEN else field
    candidates = np.vstack([g.evaluate(s, x + spec.jump_at(s, x, e)) for e in spec.marks.nodes])
    return driver.k * np.min(candidates + costs, axis=0)


def pathwise_consistency(field: ValueField, n: float, spec: ProblemSpec, bundle: PathBundle,
                         stop_rule: StopRule, driver: DriverSpec,
                         form: EstimatorForm = EstimatorForm.PATHWISE,
                         max_excluded: float = MAX_EXCLUDED) -> EstimateCI:
    """
    Estimate v_n(t, x) from the penalized representation along simulated paths.

    Per path the estimator is Psi(tau, X_tau) plus the left-point integral of
    f~^n = f~(s, X, y, z) [+ k Mg] - n Sum_i lambda_i (V(e_i) + chi_i)^- over
    the steps before tau, with y, z and V read off the field. The PATHWISE
    form subtracts the realized jumps Sum_j [v(tau_j, post) - v(tau_j, pre)];
    the COMPENSATED form subtracts Sum_i lambda_i V(e_i) inside the integral.

    Args:
        field: Field solved at penalty level n on a grid covering the paths
        n: Penalty level of the field
        spec: Problem instance
        bundle: Paths started at the point being checked
        stop_rule: HIT_H(epsilon) or FIXED_T
        driver: Driver the field was solved with
        form: Estimator form
        max_excluded: Largest tolerated fraction of paths leaving the box

    Returns:
        EstimateCI over the paths that stayed in the box

    Raises:
        PathExclusionError: More than max_excluded of the paths left the box
    """
    if n < 0:
        raise ValueError("penalty level must be non-negative")
    grid = field.grid
    if bundle.dimension != grid.dimension:
        raise ValueError("bundle and field dimensions differ")

    P, N = bundle.n_paths, bundle.n_steps
    times = bundle.times
    dt = bundle.dt_sim
    weights = spec.marks.weights

    stop = np.full(P, N)
    alive = np.ones(P, dtype=bool)
    inside = np.ones(P, dtype=bool)
    integral = np.zeros(P)

    for k in range(N + 1):
        s = times[k]
        x = bundle.X[:, k]
        inside &= ~alive | grid.contains(x)
        if not alive.any():
            break
        y = field.evaluate(s, x)
        if k < N and stop_rule.kind is StopRuleKind.HIT_H:
            hit = alive & (y <= spec.obstacle_at(s, x) + stop_rule.epsilon)
            stop[hit] = k
            alive &= ~hit
        if k == N:
            break

        sig = spec.sigma_at(s, x)
        z = np.einsum("mji,mj->mi", sig, field.gradient(s, x))
        costs = _costs(spec, s, x)
        gaps = _jump_gaps(field, spec, s, x, y)
        rate = driver.local_values(s, x, y, z) + _non_local_term(driver, field, spec, s, x, costs)
        rate = rate - n * (weights @ np.maximum(0.0, -(gaps + costs)))
        if form is EstimatorForm.COMPENSATED:
            rate = rate - weights @ gaps
        integral[alive] += rate[alive] * dt

    stop_time = times[stop]
    stop_state = bundle.X[np.arange(P), stop]
    estimate = spec.payoff_at(stop_time, stop_state) + integral

    if bundle.n_jumps:
        counted = bundle.jump_time <= stop_time[bundle.jump_path]
        paths = bundle.jump_path[counted]
        jt = bundle.jump_time[counted]
        pre = bundle.jump_pre[counted]
        post = bundle.jump_post[counted]
        if paths.size:
            outside = ~(grid.contains(pre) & grid.contains(post))
            inside[np.unique(paths[outside])] = False
            if form is EstimatorForm.PATHWISE:
                jumps = field.evaluate(jt, post) - field.evaluate(jt, pre)
                np.subtract.at(estimate, paths, jumps)

    excluded = 1.0 - float(np.mean(inside))
    if excluded > max_excluded:
        raise PathExclusionError(
            f"{excluded:.1%} of paths left the box [-{grid.box_radius:g}, {grid.box_radius:g}]^{grid.dimension}",
            excluded,
        )
    result = EstimateCI.from_samples("consistency", estimate[inside], bundle.seed, excluded)
    logger.info("consistency n=%g form=%s mean=%.6g stderr=%.3g excluded=%.3f",
                n, form.value, result.mean, result.stderr, excluded)
    return result


@dataclass(frozen=True)
class DualGap:
    """Penalized values v_n(t, x) against the double-obstacle value v(t, x)."""
    table: pd.DataFrame
    double_value: float

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.table["value"].to_numpy()) <= ORDER_TOL))

    @property
    def bounded(self) -> bool:
        return bool(np.all(self.table["value"].to_numpy() >= self.double_value - ORDER_TOL))

    @property
    def final_gap(self) -> float:
        return float(self.table["gap"].iloc[-1])


def dual_gap(spec: ProblemSpec, grid: Grid, driver: DriverSpec, n_list: Sequence[float],
             t: float, x, cfg: Optional[SolveConfig] = None) -> DualGap:
    """
    Solve the penalized problem for each n and the double-obstacle problem
    and tabulate v_n(t, x) - v(t, x).

    Returns:
        DualGap whose table has columns n, value, gap
    """
    n_list = [float(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list is empty")
    if np.any(np.diff(n_list) <= 0):
        raise ValueError("n_list must be strictly increasing")
    point = spec.points(x)

    double = float(solve_double(spec, grid, driver, cfg).evaluate(t, point)[0])
    rows = []
    for n in n_list:
        value = float(solve_penalized(spec, grid, n, driver, cfg).evaluate(t, point)[0])
        rows.append({"n": n, "value": value, "gap": value - double})
        logger.info("dual gap n=%g value=%.8g gap=%.3e", n, value, value - double)
    return DualGap(pd.DataFrame(rows), double)
