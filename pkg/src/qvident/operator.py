"""The weighted p-Laplacian map ``T(a, .)`` and numerical hypothesis checks."""

import numpy as np

from .errors import InvalidParameterError
from .grid import check_cell_field, dual_pairing, gradient
from .problem import phi_field_value

__all__ = [
    "flux",
    "apply_T",
    "energy",
    "energy_gradient",
    "check_monotone",
    "check_linear_in_a",
    "hoelder_bound_gap",
]


def _positive_coefficient(grid, a):
    a = check_cell_field(grid, a)
    if np.any(a <= 0):
        raise InvalidParameterError("coefficient a must be positive in every cell")
    return a


def _power_weight(g, p):
    """``|g|**(p-2)`` per cell with the convention ``0**(p-2) * 0 = 0``."""
    mag = np.linalg.norm(g, axis=1)
    out = np.zeros_like(mag)
    nz = mag > 0
    out[nz] = mag[nz] ** (p - 2.0)
    return out


def flux(g, a, p):
    """Cellwise ``a |g|^{p-2} g`` for a vector field ``g``."""
    return (a * _power_weight(g, p))[:, None] * g


def apply_T(prob, a, u, v, *, check_positive=True):
    """``<T(a, u), v> = sum_c a_c |g_c(u)|^{p-2} g_c(u) . g_c(v) h^d``."""
    grid = prob.grid
    a = _positive_coefficient(grid, a) if check_positive else check_cell_field(grid, a)
    gu = gradient(grid, u)
    gv = gradient(grid, v)
    return float(np.sum(np.sum(flux(gu, a, prob.p) * gv, axis=1)) * grid.cell_volume)


def energy(prob, a, u):
    """Convex potential ``sum (a/p)|Du|^p h^d + int phi(u) - <m, u>``."""
    grid = prob.grid
    a = _positive_coefficient(grid, a)
    phi_val = phi_field_value(prob, u)
    if not np.isfinite(phi_val):
        return np.inf
    mags = np.linalg.norm(gradient(grid, u), axis=1)
    smooth = float(np.sum(a / prob.p * mags**prob.p) * grid.cell_volume)
    return smooth + phi_val - dual_pairing(grid, prob.m, u)


def energy_gradient(prob, a, u):
    """Nodal gradient of the smooth part of :func:`energy` (``phi`` excluded)."""
    grid = prob.grid
    a = _positive_coefficient(grid, a)
    g = gradient(grid, u)
    fl = flux(g, a, prob.p)
    return grid.cell_volume * (grid.gradient_matrix.T @ fl.T.ravel() - prob.m)


def check_monotone(prob, a, u, v):
    """``<T(a,u) - T(a,v), u - v>``; nonnegative for a monotone map."""
    d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return apply_T(prob, a, u, d) - apply_T(prob, a, v, d)


def check_linear_in_a(prob, a, b, u, v):
    """Defect of additivity of ``T(., u)`` in the coefficient."""
    a = check_cell_field(prob.grid, a)
    b = check_cell_field(prob.grid, b)
    kw = dict(check_positive=False)
    return abs(apply_T(prob, a + b, u, v, **kw) - apply_T(prob, a, u, v, **kw) - apply_T(prob, b, u, v, **kw))


def hoelder_bound_gap(prob, a1, a2, u, v):
    """Right minus left side of the weighted Hoelder bound for ``<T(a1 - a2, u), v>``.

    The bound is ``(sum |da| |Du|^p h^d)^((p-1)/p) * (sum |da| |Dv|^p h^d)^(1/p)``
    with ``da = a1 - a2``; the gap is nonnegative up to rounding.
    """
    grid, p = prob.grid, prob.p
    da = check_cell_field(grid, a1) - check_cell_field(grid, a2)
    lhs = apply_T(prob, da, u, v, check_positive=False)
    wu = np.sum(np.abs(da) * np.linalg.norm(gradient(grid, u), axis=1) ** p) * grid.cell_volume
    wv = np.sum(np.abs(da) * np.linalg.norm(gradient(grid, v), axis=1) ** p) * grid.cell_volume
    rhs = wu ** ((p - 1.0) / p) * wv ** (1.0 / p)
    return float(rhs - lhs)
