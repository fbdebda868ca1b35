"""Multilinear interpolation on the tensor grid."""

import numpy as np
from scipy import sparse


def interpolation_matrix(grid, points: np.ndarray) -> sparse.csr_matrix:
    """
    Sparse matrix P with (P @ values)[i] = interpolated value at points[i].

    Inside the box this is multilinear interpolation; outside, the boundary
    cell's linear form is continued along each axis (linear extrapolation).
    Rows have non-negative weights summing to one for points in the box.

    Args:
        grid: Grid the values live on
        points: States, shape (m, d)

    Returns:
        CSR matrix of shape (m, grid.size)
    """
    d = grid.dimension
    n = grid.nodes_per_axis
    points = np.asarray(points, dtype=float).reshape(-1, d)
    m = points.shape[0]

    cells = []
    fracs = []
    for j in range(d):
        pos = (points[:, j] + grid.box_radius) / grid.dx
        nearest = np.round(pos)
        pos = np.where(np.abs(pos - nearest) < 1e-9, nearest, pos)  # nodes are hit exactly
        cell = np.clip(np.floor(pos).astype(int), 0, n - 2)
        cells.append(cell)
        fracs.append(pos - cell)

    rows, cols, data = [], [], []
    for corner in range(2 ** d):
        index = np.zeros(m, dtype=int)
        weight = np.ones(m)
        for j in range(d):
            bit = (corner >> (d - 1 - j)) & 1
            index = index * n + cells[j] + bit
            weight = weight * (fracs[j] if bit else 1.0 - fracs[j])
        rows.append(np.arange(m))
        cols.append(index)
        data.append(weight)

    return sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, grid.size),
    )


def interpolate(slice_, x) -> np.ndarray:
    """
    Interpolate a slice at one or many states.

    Args:
        slice_: Slice to read
        x: A state of shape (d,) or states of shape (m, d)

    Returns:
        Float for a single state, (m,) array otherwise
    """
    grid = slice_.grid
    arr = np.asarray(x, dtype=float)
    single = arr.size == grid.dimension and arr.ndim <= 1
    values = interpolation_matrix(grid, arr.reshape(-1, grid.dimension)) @ slice_.values
    return float(values[0]) if single else values
