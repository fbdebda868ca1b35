"""Backward solver engine."""

import logging
import time
from dataclasses import replace
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..core.settings import get_settings
from ..core.types import SchemeMode
from ..model.spec import DriverSpec, ProblemSpec
from ..operators.grid import Grid, Slice, ValueField
from ..operators.interpolation import interpolate
from .config import SolveConfig
from .stepper import TimeStepper
from .steppers import DoubleObstacleStepper, PenalizedStepper

logger = logging.getLogger(__name__)


class BackwardSolver:
    """
    Runs a time stepper from the terminal condition back to t = 0.

    The solver:
    1. Samples psi on the grid as the terminal slice
    2. Calls the stepper once per time step, latest first
    3. Records inner iteration counts and the growth constant of the field
    """

    def __init__(
        self,
        spec: ProblemSpec,
        grid: Grid,
        driver: DriverSpec,
        mode: SchemeMode = SchemeMode.PENALIZED,
        cfg: Optional[SolveConfig] = None,
    ):
        """
        Initialize the solver.

        Args:
            spec: Problem instance
            grid: Space-time grid
            driver: LOCAL or FROZEN driver
            mode: Penalized or double-obstacle scheme
            cfg: Scheme settings (defaults to SolveConfig())
        """
        self.spec = spec
        self.grid = grid
        self.driver = driver
        self.mode = mode
        self.cfg = cfg or SolveConfig()
        stepper_cls = PenalizedStepper if mode is SchemeMode.PENALIZED else DoubleObstacleStepper
        self.stepper: TimeStepper = stepper_cls(spec, grid, self.cfg, driver)
        self.iterations: List[int] = []
        self.field: Optional[ValueField] = None
        self.seconds = 0.0

    def run(self, verbose: bool = False) -> ValueField:
        """
        Solve backward in time.

        Args:
            verbose: Show a progress bar and print a summary

        Returns:
            The completed value field
        """
        grid = self.grid
        label = f"v_n={self.cfg.penalty_n:g}" if self.mode is SchemeMode.PENALIZED else "v"
        field = ValueField(grid, label=label)
        field.set_slice(grid.time_steps, self.spec.terminal_at(grid.points))

        start = time.perf_counter()
        self.iterations = [0] * grid.time_steps
        steps = range(grid.time_steps - 1, -1, -1)
        show = verbose or get_settings().progress
        for k in tqdm(steps, desc=f"Backward {self.mode.value}", disable=not show):
            current = self.stepper.step(field.slice(k + 1), k)
            field.set_slice(k, current)
            self.iterations[k] = self.stepper.last_iterations
        self.seconds = time.perf_counter() - start

        field.metadata["mode"] = 1.0 if self.mode is SchemeMode.DOUBLE else 0.0
        field.metadata["penalty_n"] = float(self.cfg.penalty_n)
        field.record_growth(self.spec.growth_rho)
        self.field = field
        logger.info(
            "solve model=%s mode=%s n=%g nodes=%d steps=%d max_inner=%d seconds=%.3f",
            self.spec.name, self.mode.value, self.cfg.penalty_n, grid.size, grid.time_steps,
            max(self.iterations) if self.iterations else 0, self.seconds,
        )
        if verbose:
            self.print_summary()
        return field

    def get_iterations(self) -> pd.DataFrame:
        """Inner iteration counts per time step."""
        return pd.DataFrame({"k": np.arange(len(self.iterations)),
                             "t": self.grid.times[:-1],
                             "inner_iterations": self.iterations})

    def print_summary(self):
        """Print a summary of the last solve."""
        if self.field is None:
            print("No solve has been run")
            return
        print("\n" + "=" * 60)
        print("SOLVE SUMMARY")
        print("=" * 60)
        print(f"Model:            {self.spec.name}")
        print(f"Scheme:           {self.mode.value}")
        if self.mode is SchemeMode.PENALIZED:
            print(f"Penalty n:        {self.cfg.penalty_n:g}")
        print(f"Nodes:            {self.grid.size} (dx = {self.grid.dx:.4g})")
        print(f"Time steps:       {self.grid.time_steps} (dt = {self.grid.dt:.4g})")
        print(f"Max inner iters:  {max(self.iterations)}")
        print(f"Sup norm:         {self.field.sup_norm():.6g}")
        print(f"Growth constant:  {self.field.metadata['growth_C']:.6g}")
        print(f"Wall time:        {self.seconds:.2f}s")
        print("=" * 60 + "\n")


def solve_penalized(spec: ProblemSpec, grid: Grid, n: float, driver: DriverSpec,
                    cfg: Optional[SolveConfig] = None, verbose: bool = False) -> ValueField:
    """Value field of the penalized problem at level n (n = 0: lower obstacle only)."""
    cfg = replace(cfg or SolveConfig(), penalty_n=float(n))
    return BackwardSolver(spec, grid, driver, SchemeMode.PENALIZED, cfg).run(verbose)


def solve_double(spec: ProblemSpec, grid: Grid, driver: DriverSpec,
                 cfg: Optional[SolveConfig] = None, verbose: bool = False) -> ValueField:
    """Value field of the double-obstacle problem, the limit of the penalized fields."""
    return BackwardSolver(spec, grid, driver, SchemeMode.DOUBLE, cfg).run(verbose)


def terminal_gaps(spec: ProblemSpec, driver: DriverSpec, box_radius: float, nodes_per_axis: int,
                  base_steps: int, probes: Sequence, halvings: int = 3,
                  mode: SchemeMode = SchemeMode.DOUBLE, cfg: Optional[SolveConfig] = None) -> pd.DataFrame:
    """
    |v(T - dt_j, x) - psi(x)| at probe states for dt_j = T / (base_steps 2^j).

    Only the last backward step is needed for each dt_j, so each level costs
    a single step.

    Returns:
        DataFrame with columns level, dt, probe, x1[, x2], gap
    """
    cfg = cfg or SolveConfig()
    probes = spec.points(probes)
    rows = []
    for level in range(halvings + 1):
        grid = Grid.for_problem(spec, box_radius, nodes_per_axis, base_steps * 2 ** level)
        solver = BackwardSolver(spec, grid, driver, mode, cfg)
        terminal = Slice(grid, spec.terminal_at(grid.points), spec.horizon)
        before = solver.stepper.step(terminal, grid.time_steps - 1)
        gaps = np.abs(interpolate(before, probes) - interpolate(terminal, probes))
        for i, x in enumerate(probes):
            row = {"level": level, "dt": grid.dt, "probe": i}
            row.update({f"x{j + 1}": x[j] for j in range(spec.dimension)})
            row["gap"] = gaps[i]
            rows.append(row)
    return pd.DataFrame(rows)
