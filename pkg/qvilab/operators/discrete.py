"""Discrete generator, intervention operator and penalty on the tensor grid."""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import sparse

from ..core.types import DriverMode
from .grid import Grid, Slice
from .interpolation import interpolation_matrix

logger = logging.getLogger(__name__)


def _assemble(n: int, entries) -> sparse.csr_matrix:
    rows, cols, vals = zip(*entries)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def difference_matrices_1d(n: int, dx: float) -> Dict[str, sparse.csr_matrix]:
    """
    One-dimensional difference operators on n nodes.

    ``forward`` and ``backward`` are the upwind first differences, ``central``
    the centred first difference and ``second`` the centred second difference.
    Boundary rows use one-sided second-order stencils; the second difference
    reuses the nearest three-point stencil there.
    """
    i = np.arange(n - 1)
    j = np.arange(1, n)
    mid = np.arange(1, n - 1)
    last = n - 1
    h2 = 2.0 * dx
    # one-sided second-order first derivative at each end
    left = (np.zeros(3, dtype=int), np.array([0, 1, 2]), np.array([-3.0, 4.0, -1.0]) / h2)
    right = (np.full(3, last), np.array([last - 2, last - 1, last]), np.array([1.0, -4.0, 3.0]) / h2)

    forward = _assemble(n, [
        (i, i, np.full(n - 1, -1.0 / dx)),
        (i, i + 1, np.full(n - 1, 1.0 / dx)),
        right,
    ])
    backward = _assemble(n, [
        left,
        (j, j - 1, np.full(n - 1, -1.0 / dx)),
        (j, j, np.full(n - 1, 1.0 / dx)),
    ])
    central = _assemble(n, [
        left,
        (mid, mid - 1, np.full(n - 2, -1.0 / h2)),
        (mid, mid + 1, np.full(n - 2, 1.0 / h2)),
        right,
    ])
    inv = 1.0 / dx ** 2
    second = _assemble(n, [
        (np.zeros(3, dtype=int), np.array([0, 1, 2]), np.array([inv, -2 * inv, inv])),
        (mid, mid - 1, np.full(n - 2, inv)),
        (mid, mid, np.full(n - 2, -2 * inv)),
        (mid, mid + 1, np.full(n - 2, inv)),
        (np.full(3, last), np.array([last - 2, last - 1, last]), np.array([inv, -2 * inv, inv])),
    ])
    return {"forward": forward, "backward": backward, "central": central, "second": second}


@lru_cache(maxsize=32)
def difference_matrices(grid: Grid) -> Tuple[Dict[str, sparse.csr_matrix], ...]:
    """Per-axis difference operators acting on flattened (C order) grid values."""
    base = difference_matrices_1d(grid.nodes_per_axis, grid.dx)
    if grid.dimension == 1:
        return (base,)
    eye = sparse.identity(grid.nodes_per_axis, format="csr")
    return (
        {k: sparse.kron(v, eye, format="csr") for k, v in base.items()},
        {k: sparse.kron(eye, v, format="csr") for k, v in base.items()},
    )


def generator_matrix(t: float, spec, grid: Grid) -> sparse.csr_matrix:
    """
    Sparse discrete generator L(t).

    Drift uses upwind differences chosen by the sign of each a_j, diffusion
    uses centred second differences with cross terms from products of
    centred first differences.
    """
    points = grid.points
    a = spec.drift_at(t, points)
    sig = spec.sigma_at(t, points)
    c = np.einsum("nij,nkj->nik", sig, sig)
    ops = difference_matrices(grid)
    L = sparse.csr_matrix((grid.size, grid.size))
    for j in range(grid.dimension):
        L = L + sparse.diags(np.maximum(a[:, j], 0.0)) @ ops[j]["forward"]
        L = L + sparse.diags(np.minimum(a[:, j], 0.0)) @ ops[j]["backward"]
        L = L + sparse.diags(0.5 * c[:, j, j]) @ ops[j]["second"]
    for i in range(grid.dimension):
        for j in range(i + 1, grid.dimension):
            L = L + sparse.diags(c[:, i, j]) @ (ops[i]["central"] @ ops[j]["central"])
    return L.tocsr()


def generator_apply(slice_: Slice, t: float, spec, grid: Grid) -> Slice:
    """Apply the discrete generator L(t) to a slice."""
    return Slice(grid, generator_matrix(t, spec, grid) @ slice_.values, t)


def central_gradient(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Centred-difference gradient of flattened values, shape (size, d)."""
    ops = difference_matrices(grid)
    return np.stack([ops[j]["central"] @ values for j in range(grid.dimension)], axis=1)


@dataclass(frozen=True, eq=False)
class InterventionStencil:
    """
    Post-impulse interpolation and costs for every mark at one time.

    ``candidates(v)[i]`` is v(x + gamma(t, x, e_i)) + chi(t, x, e_i) at every node,
    shared by the intervention operator and the penalty.
    """
    grid: Grid
    t: float
    weights: np.ndarray
    matrices: tuple
    costs: np.ndarray

    @classmethod
    def build(cls, spec, grid: Grid, t: float) -> "InterventionStencil":
        points = grid.points
        matrices = []
        costs = []
        for e in spec.marks.nodes:
            targets = points + spec.jump_at(t, points, e)
            matrices.append(interpolation_matrix(grid, targets))
            costs.append(spec.cost_at(t, points, e))
        return cls(grid, float(t), spec.marks.weights.copy(), tuple(matrices), np.vstack(costs))

    def candidates(self, values: np.ndarray) -> np.ndarray:
        return np.vstack([P @ values for P in self.matrices]) + self.costs

    def apply_M(self, values: np.ndarray) -> np.ndarray:
        return np.min(self.candidates(values), axis=0)

    def active(self, values: np.ndarray) -> np.ndarray:
        """Marks whose penalty integrand is positive, shape (marks, size)."""
        return values[None, :] - self.candidates(values) > 0

    def penalty(self, values: np.ndarray, n: float) -> np.ndarray:
        if n < 0:
            raise ValueError("penalty level must be non-negative")
        excess = np.maximum(0.0, values[None, :] - self.candidates(values))
        return n * (self.weights @ excess)

    def linearization(self, active: np.ndarray) -> Tuple[sparse.csr_matrix, np.ndarray]:
        """
        Penalty with the active set frozen: Sum_i lambda_i 1_{S_i} (w - P_i w - chi_i).

        Returns:
            (B, c) so that the frozen penalty is B @ w - c
        """
        eye = sparse.identity(self.grid.size, format="csr")
        B = sparse.csr_matrix((self.grid.size, self.grid.size))
        c = np.zeros(self.grid.size)
        for lam, mask, P, chi in zip(self.weights, active, self.matrices, self.costs):
            if not np.any(mask):
                continue
            scale = lam * mask.astype(float)
            B = B + sparse.diags(scale) @ (eye - P)
            c += scale * chi
        return B.tocsr(), c


def apply_M(slice_: Slice, t: float, spec, grid: Grid) -> Slice:
    """Intervention operator: min over marks of v(x + gamma) + chi at every node."""
    return Slice(grid, InterventionStencil.build(spec, grid, t).apply_M(slice_.values), t)


def penalty(slice_: Slice, t: float, n: float, spec, grid: Grid) -> Slice:
    """Penalty operator n * Sum_i lambda_i (v(x + gamma_i) + chi_i - v(x))^-."""
    return Slice(grid, InterventionStencil.build(spec, grid, t).penalty(slice_.values, n), t)


def driver_values(driver, t: float, k: int, values: np.ndarray, spec, grid: Grid,
                  stencil: Optional[InterventionStencil] = None) -> np.ndarray:
    """
    Full driver at every node for the unknown ``values`` at time index ``k``.

    The z argument is sigma^T times the centred gradient. FROZEN drivers add
    k * M(g_k) for the frozen field g; LOCAL_PLUS_K_M adds k * M(values).
    """
    points = grid.points
    sig = spec.sigma_at(t, points)
    z = np.einsum("nji,nj->ni", sig, central_gradient(values, grid))
    out = driver.local_values(t, points, values, z)
    if driver.mode is DriverMode.LOCAL or driver.k == 0.0:
        return out
    stencil = stencil or InterventionStencil.build(spec, grid, t)
    if driver.mode is DriverMode.FROZEN:
        driver.frozen.grid.check_same(grid)
        return out + driver.k * stencil.apply_M(driver.frozen.values[k])
    return out + driver.k * stencil.apply_M(values)
