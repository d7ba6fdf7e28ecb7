"""Cellwise gradient-ball constraint sets ``C`` and ``K(w)``."""

import numpy as np

from .errors import GridMismatchError, InvalidConfigError
from .grid import check_cell_field, check_node_field, gradient

__all__ = ["radii_of", "global_radii", "is_feasible", "project_gradient", "sample_feasible"]


def radii_of(prob, w):
    """Radii ``c(w_bar)`` per cell, ``w_bar`` the mean of the cell's corner nodes."""
    grid = prob.grid
    w = check_node_field(grid, w)
    return prob.constraint(grid.averaging_matrix @ w)


def global_radii(prob):
    """Radii of the outer set ``C`` (``|Du| <= c0`` everywhere)."""
    return np.full(prob.grid.cell_count, prob.constraint.c0)


def is_feasible(grid, v, r, tol=0.0):
    """Return ``(feasible, max_violation)`` with ``max_violation = max(|Dv| - r)``."""
    if tol < 0:
        raise InvalidConfigError("tol must be nonnegative")
    r = check_cell_field(grid, r)
    mags = np.linalg.norm(gradient(grid, v), axis=1)
    viol = float(np.max(mags - r))
    return viol <= tol, viol


def project_gradient(w, r):
    """Project each cell vector of ``w`` onto the ball of radius ``r_c``."""
    w = np.asarray(w, dtype=float)
    r = np.asarray(r, dtype=float)
    if w.ndim != 2 or r.shape != (w.shape[0],):
        raise GridMismatchError(f"vector field {w.shape} and radii {r.shape} do not match")
    mags = np.linalg.norm(w, axis=1)
    out = w.copy()
    # a few ulps of slack keep the map idempotent under rounding
    over = mags > r * (1.0 + 4.0 * np.finfo(float).eps)
    out[over] *= (r[over] / mags[over])[:, None]
    return out


def sample_feasible(grid, r, seed, count):
    """Draw ``count`` seeded random node fields, each scaled into ``{|Dv| <= r}``."""
    if count < 1:
        raise InvalidConfigError("count must be >= 1")
    r = check_cell_field(grid, r)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        q = rng.uniform(-1.0, 1.0, grid.interior_node_count)
        mags = np.linalg.norm(gradient(grid, q), axis=1)
        s = min(1.0, float(np.min(r / (mags + 1e-14))))
        if s < 1.0:
            s *= 1.0 - 1e-12  # keeps |D(s q)| <= r exact under rounding
        out.append(s * q)
    return out
