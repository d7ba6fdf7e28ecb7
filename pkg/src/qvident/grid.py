"""Uniform grids on the unit interval / unit square with zero Dirichlet data.

Discrete fields are plain numpy arrays:

* node fields: shape ``(interior_node_count,)``, one value per interior node
  (boundary nodes are implicitly zero);
* cell fields: shape ``(cell_count,)``;
* vector fields: shape ``(cell_count, dim)``.

In 2D, nodes and cells are ordered row-major with the x index first, i.e.
``u.reshape(n - 1, n - 1)[ix, iy]``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatchError, InvalidConfigError

__all__ = [
    "Grid",
    "make_grid",
    "gradient",
    "gradient_adjoint",
    "dual_pairing",
    "norm_lp_vector",
    "check_node_field",
    "check_cell_field",
    "check_vector_field",
]


def _difference_1d(n):
    # (n, n+1): forward differences over all nodes, unscaled
    return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


def _average_1d(n):
    return sp.diags([0.5 * np.ones(n), 0.5 * np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` cells per axis on ``(0, 1)**dim``."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidConfigError(f"dim must be 1 or 2, got {self.dim!r}")
        if int(self.n) != self.n or self.n < 2:
            raise InvalidConfigError(f"n must be an integer >= 2, got {self.n!r}")

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def cell_volume(self):
        return self.h**self.dim

    @property
    def cell_count(self):
        return self.n**self.dim

    @property
    def interior_node_count(self):
        return (self.n - 1) ** self.dim

    @cached_property
    def _interior_columns(self):
        n = self.n
        if self.dim == 1:
            return np.arange(1, n)
        full = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
        return full[1:n, 1:n].ravel()

    @cached_property
    def gradient_matrix(self):
        """Sparse ``(dim * cell_count, interior_node_count)`` gradient, component-major."""
        n, h = self.n, self.h
        diff = _difference_1d(n) / h
        cols = self._interior_columns
        if self.dim == 1:
            return diff.tocsc()[:, cols].tocsr()
        avg = _average_1d(n)
        gx = sp.kron(diff, avg, format="csc")[:, cols]
        gy = sp.kron(avg, diff, format="csc")[:, cols]
        return sp.vstack([gx, gy], format="csr")

    @cached_property
    def averaging_matrix(self):
        """Sparse ``(cell_count, interior_node_count)`` corner average per cell."""
        avg = _average_1d(self.n)
        if self.dim == 2:
            avg = sp.kron(avg, avg, format="csr")
        return avg.tocsc()[:, self._interior_columns].tocsr()

    @cached_property
    def stiffness_matrix(self):
        """``D^T D`` for the gradient matrix ``D`` (no cell-volume factor)."""
        d = self.gradient_matrix
        return (d.T @ d).tocsc()

    def zeros_node(self):
        return np.zeros(self.interior_node_count)

    def zeros_cell(self):
        return np.zeros(self.cell_count)

    def cell_centers(self):
        """Cell-center coordinates, shape ``(cell_count, dim)``."""
        c = (np.arange(self.n) + 0.5) * self.h
        if self.dim == 1:
            return c[:, None]
        x, y = np.meshgrid(c, c, indexing="ij")
        return np.column_stack([x.ravel(), y.ravel()])

    def node_coordinates(self):
        """Interior node coordinates, shape ``(interior_node_count, dim)``."""
        c = np.arange(1, self.n) * self.h
        if self.dim == 1:
            return c[:, None]
        x, y = np.meshgrid(c, c, indexing="ij")
        return np.column_stack([x.ravel(), y.ravel()])


def make_grid(dim, n):
    return Grid(int(dim), int(n))


def _check(grid, values, shape, kind):
    arr = np.asarray(values, dtype=float)
    if arr.shape != shape:
        raise GridMismatchError(f"{kind} field has shape {arr.shape}, expected {shape} for {grid}")
    return arr


def check_node_field(grid, u):
    return _check(grid, u, (grid.interior_node_count,), "node")


def check_cell_field(grid, a):
    return _check(grid, a, (grid.cell_count,), "cell")


def check_vector_field(grid, w):
    return _check(grid, w, (grid.cell_count, grid.dim), "vector")


def gradient(grid, u):
    """Cellwise gradient of a node field, returned as a ``(cell_count, dim)`` array.

    1D uses forward differences. 2D differentiates the bilinear interpolant
    at the cell center, so each component averages the two edge differences
    of the cell.
    """
    u = check_node_field(grid, u)
    return (grid.gradient_matrix @ u).reshape(grid.dim, grid.cell_count).T


def gradient_adjoint(grid, w):
    """Euclidean adjoint ``D^T w`` of :func:`gradient` (no cell-volume factor)."""
    w = check_vector_field(grid, w)
    return grid.gradient_matrix.T @ w.T.ravel()


def dual_pairing(grid, f, v):
    """Nodal quadrature of ``int f v``."""
    f = check_node_field(grid, f)
    v = check_node_field(grid, v)
    return float(np.dot(f, v) * grid.cell_volume)


def norm_lp_vector(grid, w, p):
    """Discrete ``L^p(Omega; R^d)`` norm of a cellwise vector field."""
    if p < 1:
        raise InvalidConfigError(f"norm exponent must be >= 1, got {p}")
    w = check_vector_field(grid, w)
    mags = np.linalg.norm(w, axis=1)
    return float(np.sum(mags**p) * grid.cell_volume) ** (1.0 / p)
