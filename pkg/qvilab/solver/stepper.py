"""Abstract backward time stepper."""

import logging
from abc import ABC, abstractmethod
from typing import Dict

import numpy as np
from scipy import sparse

from ..model.spec import DriverSpec, ProblemSpec
from ..operators.discrete import InterventionStencil, generator_matrix
from ..operators.grid import Grid, Slice
from .config import SolveConfig

logger = logging.getLogger(__name__)


class TimeStepper(ABC):
    """
    One backward step of a theta-scheme: slice k from slice k + 1.

    Subclasses decide how the obstacles enter. The base class owns the
    generator cache and the pieces every scheme shares.
    """

    def __init__(self, spec: ProblemSpec, grid: Grid, cfg: SolveConfig, driver: DriverSpec):
        """
        Initialize the stepper.

        Args:
            spec: Problem instance
            grid: Space-time grid matching the spec
            cfg: Scheme settings
            driver: LOCAL or FROZEN driver
        """
        if not driver.is_local:
            raise ValueError(f"steppers need a LOCAL or FROZEN driver, got {driver.mode.value}")
        if driver.frozen is not None:
            driver.frozen.grid.check_same(grid)
        if grid.dimension != spec.dimension or grid.horizon != spec.horizon:
            raise ValueError("grid does not match the problem dimension or horizon")
        self.spec = spec
        self.grid = grid
        self.cfg = cfg
        self.driver = driver
        self.last_iterations = 0
        self._generators: Dict[int, sparse.csr_matrix] = {}
        self._identity = sparse.identity(grid.size, format="csc")

    def generator(self, k: int) -> sparse.csr_matrix:
        if k not in self._generators:
            # keep only what the next (earlier) step can reuse
            for stale in [j for j in self._generators if j > k + 1]:
                del self._generators[stale]
            self._generators[k] = generator_matrix(self.grid.time(k), self.spec, self.grid)
        return self._generators[k]

    def system(self, next_values: np.ndarray, k: int):
        """
        Matrix and explicit part of the theta-scheme at time index k.

        Returns:
            (A, base) with A = I - theta dt L(t_k) and
            base = next + (1 - theta) dt L(t_{k+1}) next
        """
        dt = self.grid.dt
        theta = self.cfg.theta
        A = (self._identity - theta * dt * self.generator(k)).tocsc()
        base = next_values.copy()
        if theta < 1.0:
            base = base + (1.0 - theta) * dt * (self.generator(k + 1) @ next_values)
        return A, base

    def obstacle(self, k: int) -> np.ndarray:
        return self.spec.obstacle_at(self.grid.time(k), self.grid.points)

    def stencil(self, k: int) -> InterventionStencil:
        return InterventionStencil.build(self.spec, self.grid, self.grid.time(k))

    @abstractmethod
    def step(self, next_slice: Slice, k: int) -> Slice:
        """
        Produce the slice at time index k.

        Args:
            next_slice: Slice at time index k + 1
            k: Time index being computed

        Returns:
            Slice at t_k, projected above the lower obstacle
        """
        pass
