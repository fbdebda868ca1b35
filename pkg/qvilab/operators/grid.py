"""Space-time grid, value slices and value fields."""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import pandas as pd

from ..core.errors import GridMismatchError
from .interpolation import interpolation_matrix


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on the box [-L, L]^d with a uniform time partition of [0, T]."""
    box_radius: float
    nodes_per_axis: int
    time_steps: int
    horizon: float
    dimension: int = 1

    def __post_init__(self):
        if self.box_radius <= 0:
            raise ValueError("box_radius must be positive")
        if self.nodes_per_axis < 3:
            raise ValueError("nodes_per_axis must be at least 3")
        if self.time_steps < 1:
            raise ValueError("time_steps must be at least 1")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")

    @classmethod
    def for_problem(cls, spec, box_radius: float, nodes_per_axis: int, time_steps: int) -> "Grid":
        """Grid matched to a ProblemSpec; the box must contain the K_Gamma ball strictly."""
        if box_radius <= spec.k_gamma:
            raise ValueError(f"box_radius {box_radius} must exceed K_Gamma {spec.k_gamma}")
        return cls(box_radius, nodes_per_axis, time_steps, spec.horizon, spec.dimension)

    @property
    def dx(self) -> float:
        return 2.0 * self.box_radius / (self.nodes_per_axis - 1)

    @property
    def dt(self) -> float:
        return self.horizon / self.time_steps

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.box_radius, self.box_radius, self.nodes_per_axis)

    @property
    def shape(self) -> tuple:
        return (self.nodes_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.nodes_per_axis ** self.dimension

    @property
    def points(self) -> np.ndarray:
        """Node coordinates, shape (size, d), C order (last axis fastest)."""
        mesh = np.meshgrid(*([self.axis] * self.dimension), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.time_steps + 1)

    def time(self, k: int) -> float:
        return float(self.times[k])

    def interior_mask(self, radius: Optional[float] = None) -> np.ndarray:
        """Nodes strictly inside the box (and inside ``radius`` in max-norm if given)."""
        idx = np.indices(self.shape).reshape(self.dimension, -1)
        mask = np.all((idx > 0) & (idx < self.nodes_per_axis - 1), axis=0)
        if radius is not None:
            mask &= np.max(np.abs(self.points), axis=1) <= radius + 1e-12
        return mask

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Which points lie in the closed box."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dimension)
        return np.all(np.abs(x) <= self.box_radius, axis=1)

    def refined(self) -> "Grid":
        """Halve dx and dt."""
        return Grid(self.box_radius, 2 * self.nodes_per_axis - 1, 2 * self.time_steps,
                    self.horizon, self.dimension)

    def check_same(self, other: "Grid"):
        if self != other:
            raise GridMismatchError(f"grid mismatch: {self} vs {other}")


@dataclass(frozen=True, eq=False)
class Slice:
    """Values on all grid nodes at one time."""
    grid: Grid
    values: np.ndarray
    t: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.grid.size:
            raise ValueError(f"slice has {values.shape[0]} values, grid has {self.grid.size} nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"slice at t={self.t} has non-finite values")
        object.__setattr__(self, "values", values)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def __add__(self, other):
        if isinstance(other, Slice):
            self.grid.check_same(other.grid)
            return Slice(self.grid, self.values + other.values, self.t)
        return Slice(self.grid, self.values + float(other), self.t)


class ValueField:
    """
    A numerical value function: one slice per time step 0..N_t.

    Slices are filled by the backward solvers (terminal slice first).
    """

    def __init__(self, grid: Grid, values: Optional[np.ndarray] = None, label: str = "v"):
        """
        Initialize a field.

        Args:
            grid: Space-time grid
            values: Optional array of shape (time_steps + 1, size)
            label: Name used in reports
        """
        self.grid = grid
        self.label = label
        if values is None:
            self.values = np.full((grid.time_steps + 1, grid.size), np.nan)
        else:
            values = np.asarray(values, dtype=float).reshape(grid.time_steps + 1, grid.size)
            if not np.all(np.isfinite(values)):
                raise ValueError("field values must be finite")
            self.values = values.copy()
        self.metadata: Dict[str, float] = {}
        self._gradients: Dict[int, np.ndarray] = {}

    @classmethod
    def zeros(cls, grid: Grid, label: str = "v") -> "ValueField":
        return cls(grid, np.zeros((grid.time_steps + 1, grid.size)), label)

    @property
    def complete(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def slice(self, k: int) -> Slice:
        return Slice(self.grid, self.values[k], self.grid.time(k))

    def set_slice(self, k: int, values):
        values = values.values if isinstance(values, Slice) else np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"slice {k} has non-finite values")
        self.values[k] = values
        self._gradients.pop(k, None)

    def terminal(self) -> Slice:
        return self.slice(self.grid.time_steps)

    def copy(self, label: Optional[str] = None) -> "ValueField":
        out = ValueField(self.grid, self.values, label or self.label)
        out.metadata = dict(self.metadata)
        return out

    def shifted(self, constant: float) -> "ValueField":
        return ValueField(self.grid, self.values + constant, self.label)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def sup_distance(self, other: "ValueField") -> float:
        self.grid.check_same(other.grid)
        return float(np.max(np.abs(self.values - other.values)))

    def record_growth(self, rho: float) -> float:
        """Fit C in |v| <= C (1 + |x|^rho) over the whole field and store it."""
        weight = 1.0 + np.linalg.norm(self.grid.points, axis=1) ** rho
        constant = float(np.max(np.abs(self.values) / weight[None, :]))
        self.metadata["growth_C"] = constant
        self.metadata["growth_p"] = float(rho)
        return constant

    # Off-grid evaluation

    def _time_weights(self, s) -> tuple:
        s = np.asarray(s, dtype=float)
        k = np.clip(np.floor(s / self.grid.dt + 1e-9).astype(int), 0, self.grid.time_steps - 1)
        w = np.clip(s / self.grid.dt - k, 0.0, 1.0)
        return k, w

    def _gradient_slice(self, k: int) -> np.ndarray:
        if k not in self._gradients:
            from .discrete import central_gradient
            self._gradients[k] = central_gradient(self.values[k], self.grid)
        return self._gradients[k]

    def evaluate(self, s, points: np.ndarray) -> np.ndarray:
        """
        Field value at times ``s`` (scalar or (m,)) and states ``points`` (m, d).

        Linear in time between neighbouring slices, multilinear in space.
        """
        points = np.asarray(points, dtype=float).reshape(-1, self.grid.dimension)
        m = points.shape[0]
        k, w = self._time_weights(np.broadcast_to(np.asarray(s, dtype=float), (m,)))
        out = np.empty(m)
        for kk in np.unique(k):
            sel = k == kk
            P = interpolation_matrix(self.grid, points[sel])
            lower = P @ self.values[kk]
            upper = P @ self.values[kk + 1]
            out[sel] = (1.0 - w[sel]) * lower + w[sel] * upper
        return out

    def gradient(self, s, points: np.ndarray) -> np.ndarray:
        """Interpolated central-difference gradient, shape (m, d)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.grid.dimension)
        m = points.shape[0]
        k, w = self._time_weights(np.broadcast_to(np.asarray(s, dtype=float), (m,)))
        out = np.empty((m, self.grid.dimension))
        for kk in np.unique(k):
            sel = k == kk
            P = interpolation_matrix(self.grid, points[sel])
            lower = P @ self._gradient_slice(kk)
            upper = P @ self._gradient_slice(kk + 1)
            out[sel] = (1.0 - w[sel])[:, None] * lower + w[sel][:, None] * upper
        return out

    # Tabular output

    def to_frame(self) -> pd.DataFrame:
        """Columns t, x1[, x2], v; time-major, then node index."""
        grid = self.grid
        points = grid.points
        n_t = grid.time_steps + 1
        data = {"t": np.repeat(grid.times, grid.size)}
        for j in range(grid.dimension):
            data[f"x{j + 1}"] = np.tile(points[:, j], n_t)
        data["v"] = self.values.reshape(-1)
        return pd.DataFrame(data)
