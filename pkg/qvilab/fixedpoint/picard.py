"""Picard iteration for drivers with a non-local M-term."""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..core.errors import PicardDivergenceError
from ..core.settings import get_settings
from ..core.types import DriverMode
from ..model.spec import DriverSpec, ProblemSpec
from ..operators.grid import Grid, ValueField
from ..solver.config import SolveConfig
from ..solver.engine import solve_double

logger = logging.getLogger(__name__)


@dataclass
class IterationTrace:
    """
    Convergence record of a Picard run.

    Attributes:
        diffs: d_k = |v_k - v_{k-1}|_sup for k = 1, 2, ...
        seconds: Wall time of each iteration
        sup_norms: |v_k|_sup of each iterate
        tol: Stopping tolerance
    """
    diffs: List[float] = field(default_factory=list)
    seconds: List[float] = field(default_factory=list)
    sup_norms: List[float] = field(default_factory=list)
    tol: float = 0.0

    def record(self, diff: float, seconds: float, sup_norm: float):
        self.diffs.append(float(diff))
        self.seconds.append(float(seconds))
        self.sup_norms.append(float(sup_norm))

    @property
    def iterations(self) -> int:
        return len(self.diffs)

    @property
    def ratios(self) -> List[float]:
        """r_k = d_k / d_{k-1}; NaN for k = 1 or when d_{k-1} = 0."""
        out = [float("nan")]
        for prev, cur in zip(self.diffs, self.diffs[1:]):
            out.append(cur / prev if prev > 0 else float("nan"))
        return out[: self.iterations]

    @property
    def final_residual(self) -> float:
        return self.diffs[-1] if self.diffs else float("nan")

    @property
    def converged(self) -> bool:
        return bool(self.diffs) and self.diffs[-1] <= self.tol

    @property
    def max_norm(self) -> float:
        return max(self.sup_norms) if self.sup_norms else 0.0

    def to_frame(self) -> pd.DataFrame:
        """Columns k, diff, ratio, seconds."""
        return pd.DataFrame({
            "k": np.arange(1, self.iterations + 1),
            "diff": self.diffs,
            "ratio": self.ratios,
            "seconds": self.seconds,
        })


def _require_non_local(driver: DriverSpec):
    if driver.mode is not DriverMode.LOCAL_PLUS_K_M:
        raise ValueError(f"Picard iteration needs a LOCAL_PLUS_K_M driver, got {driver.mode.value}")


def picard_solve(spec: ProblemSpec, grid: Grid, driver: DriverSpec, tol: float, kmax: int,
                 cfg: Optional[SolveConfig] = None,
                 verbose: bool = False) -> Tuple[ValueField, IterationTrace]:
    """
    Iterate v_k = solve_double(driver frozen at v_{k-1}) from v_0 = 0.

    Args:
        spec: Problem instance
        grid: Grid shared by every iterate
        driver: LOCAL_PLUS_K_M driver
        tol: Stop when d_k <= tol
        kmax: Iteration budget
        cfg: Scheme settings of each solve
        verbose: Show a progress bar and print a summary

    Returns:
        (last iterate, trace)

    Raises:
        PicardDivergenceError: kmax reached with d_k > tol
    """
    _require_non_local(driver)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if kmax < 1:
        raise ValueError("kmax must be at least 1")

    trace = IterationTrace(tol=tol)
    current = ValueField.zeros(grid, label="v_0")
    show = verbose or get_settings().progress
    bar = tqdm(range(1, kmax + 1), desc="Picard", disable=not show)
    for k in bar:
        start = time.perf_counter()
        nxt = solve_double(spec, grid, driver.frozen_at(current), cfg)
        nxt.label = f"v_{k}"
        diff = nxt.sup_distance(current)
        trace.record(diff, time.perf_counter() - start, nxt.sup_norm())
        logger.info("picard k=%d diff=%.3e ratio=%.3g", k, diff, trace.ratios[-1])
        bar.set_postfix(diff=f"{diff:.2e}")
        current = nxt
        if diff <= tol:
            break
    else:
        raise PicardDivergenceError(
            f"Picard iteration missed tol={tol:g} after {kmax} iterations "
            f"(last diff {trace.final_residual:.3g})",
            trace,
        )

    current.metadata["picard_iterations"] = float(trace.iterations)
    if verbose:
        print_trace(trace)
    return current, trace


def fixed_point_residual(field: ValueField, spec: ProblemSpec, grid: Grid, driver: DriverSpec,
                         cfg: Optional[SolveConfig] = None) -> float:
    """|Phi(field) - field|_sup where Phi solves the double-obstacle problem with the field frozen."""
    _require_non_local(driver)
    field.grid.check_same(grid)
    image = solve_double(spec, grid, driver.frozen_at(field), cfg)
    return image.sup_distance(field)


def print_trace(trace: IterationTrace):
    """Print a Picard summary."""
    print("\n" + "=" * 60)
    print("PICARD SUMMARY")
    print("=" * 60)
    print(f"Iterations:       {trace.iterations}")
    print(f"Converged:        {trace.converged}")
    print(f"Final diff:       {trace.final_residual:.3e}")
    print(f"Max sup norm:     {trace.max_norm:.6g}")
    print(f"Wall time:        {sum(trace.seconds):.2f}s")
    print("=" * 60 + "\n")
