"""ADMM solver for the variational inequality on a fixed constraint set.

For fixed radii ``r`` the inequality is the optimality condition of the
convex program

    min_u  sum_c (a_c/p) |D_c u|^p h^d + sum_i phi(u_i) h^d - <m, u>
    s.t.   |D_c u| <= r_c  for every cell c,

which is solved with the splitting ``g = D u`` (and ``w = u`` when ``phi`` is
not identically zero). The ``u``-step is a sparse linear solve whose matrix
does not depend on the penalty, so it is factorized once per call. The ADMM
map is accelerated with safeguarded Anderson mixing, which matters on
instances with many weakly active cells where plain ADMM crawls.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .constraint import is_feasible
from .errors import InvalidConfigError, InvalidParameterError
from .grid import check_cell_field, check_node_field
from .operator import flux

__all__ = ["InnerOptions", "KktReport", "prox_power_ball", "kkt_residual", "solve_vi"]

# weight of the u = w consensus relative to D u = g
_SIGMA = 1.0


@dataclass(frozen=True)
class InnerOptions:
    """Settings for :func:`solve_vi`.

    ``anderson_memory = 0`` switches acceleration off. ``penalty`` is only the
    starting value; it is rebalanced every ``adapt_every`` iterations until
    ``adapt_until``.
    """

    max_iter: int = 20000
    tol_kkt: float = 1e-8
    penalty: float = 1.0
    over_relaxation: float = 1.8
    adapt_every: int = 10
    adapt_until: int = 1000
    anderson_memory: int = 20
    check_every: int = 5

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidConfigError("max_iter must be >= 1")
        if not self.tol_kkt > 0:
            raise InvalidConfigError("tol_kkt must be positive")
        if not self.penalty > 0:
            raise InvalidConfigError("penalty must be positive")
        if not 1.0 <= self.over_relaxation < 2.0:
            raise InvalidConfigError("over_relaxation must lie in [1, 2)")
        if self.anderson_memory < 0:
            raise InvalidConfigError("anderson_memory must be >= 0")


@dataclass(frozen=True)
class KktReport:
    iterations: int
    primal_residual: float
    stationarity_residual: float
    feasibility_violation: float
    tol_kkt: float
    converged: bool

    @property
    def worst(self):
        return max(self.primal_residual, self.stationarity_residual, self.feasibility_violation)


def _radial_root(a, p, rho, b):
    """Solve ``a t^(p-1) + rho t = rho b`` for ``t in [0, b]`` elementwise."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    if p == 2.0:
        return rho * b / (a + rho)
    t = np.zeros_like(b)
    act = b > 0
    if not np.any(act):
        return t
    aa, bb = a[act], b[act]
    lo = np.zeros_like(bb)
    hi = bb.copy()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # both candidates bound the root from above
        x = np.minimum(bb, (rho * bb / aa) ** (1.0 / (p - 1.0)))
        for _ in range(200):
            f = aa * x ** (p - 1.0) + rho * (x - bb)
            fp = aa * (p - 1.0) * x ** (p - 2.0) + rho
            hi = np.where(f > 0, x, hi)
            lo = np.where(f <= 0, x, lo)
            xn = x - f / fp
            bad = ~np.isfinite(xn) | (xn < lo) | (xn > hi)
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            done = (~bad & (np.abs(xn - x) <= 1e-15 * bb)) | (np.abs(f) <= 1e-15 * rho * bb)
            x = xn
            if np.all(done):
                break
    t[act] = x
    return t


def prox_power_ball(v, a, p, rho, r):
    """Cellwise ``argmin_g (a/p)|g|^p + I(|g| <= r) + (rho/2)|g - v|^2``.

    The minimizer is radial, so the power prox is computed on ``|v|`` and then
    clamped to the ball radius.
    """
    v = np.asarray(v, dtype=float)
    mags = np.linalg.norm(v, axis=1)
    t = np.minimum(_radial_root(a, p, rho, mags), r)
    scale = np.zeros_like(mags)
    nz = mags > 0
    scale[nz] = t[nz] / mags[nz]
    return v * scale[:, None]


def _flat(w):
    return w.T.ravel()


def _cells(x, grid):
    return x.reshape(grid.dim, grid.cell_count).T


def kkt_residual(prob, a, r, u, g_split=None, multipliers=None, *, iterations=0, tol_kkt=1e-8):
    """Optimality residuals of ``u`` recomputed from scratch.

    ``multipliers = (lam, mu)`` are the densities for ``D u = g`` (cell
    vectors) and for the nodal ``phi`` term; the default is the smooth flux
    ``a |g|^{p-2} g`` and ``mu = 0``. Stationarity collects
    ``D^T lam + mu - m`` and the prox-residuals certifying
    ``lam in dG(g)`` and ``mu in dphi(u)``, all in discrete L2 norms.
    """
    grid, p = prob.grid, prob.p
    a = check_cell_field(grid, a)
    r = check_cell_field(grid, r)
    u = check_node_field(grid, u)
    vol = grid.cell_volume
    du = _cells(grid.gradient_matrix @ u, grid)
    g = du if g_split is None else np.asarray(g_split, dtype=float).reshape(du.shape)
    if multipliers is None:
        lam, mu = flux(g, a, p), np.zeros_like(u)
    else:
        lam, mu = multipliers
        lam = np.asarray(lam, dtype=float).reshape(du.shape)
        mu = np.zeros_like(u) if mu is None else np.asarray(mu, dtype=float)

    primal = np.sqrt(vol * np.sum((du - g) ** 2))
    station = grid.gradient_matrix.T @ _flat(lam) + mu - prob.m
    member_g = g - prox_power_ball(g + lam, a, p, 1.0, r)
    member_u = u - prob.phi.prox(u + mu, 1.0)
    stationarity = np.sqrt(vol * (np.sum(station**2) + np.sum(member_g**2) + np.sum(member_u**2)))
    _, viol = is_feasible(grid, u, r, 0.0)
    viol = max(viol, 0.0)
    converged = bool(primal <= tol_kkt and stationarity <= tol_kkt and viol <= tol_kkt)
    return KktReport(int(iterations), float(primal), float(stationarity), float(viol), float(tol_kkt), converged)


@dataclass
class _AdmmState:
    g: np.ndarray
    y: np.ndarray
    w: np.ndarray
    s: np.ndarray
    rho: float


def _factor(grid, use_w):
    k = grid.stiffness_matrix
    if use_w:
        k = k + _SIGMA * sp.identity(grid.interior_node_count, format="csc")
    return splu(sp.csc_matrix(k))


class _Anderson:
    """Type-II Anderson mixing on the ADMM fixed-point map, limited memory."""

    def __init__(self, memory):
        self.memory = memory
        self.reset()

    def reset(self):
        self.zs, self.fs = [], []

    def push(self, fz, f):
        # fz = F(z), f = F(z) - z
        self.zs.append(fz)
        self.fs.append(f)
        if len(self.zs) > self.memory + 1:
            self.zs.pop(0)
            self.fs.pop(0)

    def propose(self):
        if len(self.zs) < 2:
            return None
        df = np.diff(np.array(self.fs), axis=0).T
        dg = np.diff(np.array(self.zs), axis=0).T
        f = self.fs[-1]
        # ridge-regularized least squares for the mixing weights
        gram = df.T @ df
        reg = 1e-10 * np.trace(gram) + 1e-300
        try:
            gamma = np.linalg.solve(gram + reg * np.eye(gram.shape[0]), df.T @ f)
        except np.linalg.LinAlgError:
            return None
        z = self.zs[-1] - dg @ gamma
        return z if np.all(np.isfinite(z)) else None


def _admm(prob, a, r, opts, u0, state):
    grid, p = prob.grid, prob.p
    dmat = grid.gradient_matrix
    vol = grid.cell_volume
    use_w = not prob.phi.is_zero
    lu = _factor(grid, use_w)
    alpha = opts.over_relaxation
    nc = grid.cell_count * grid.dim
    nn = grid.interior_node_count

    u = grid.zeros_node() if u0 is None else np.array(u0, dtype=float)
    if state is None:
        rho = opts.penalty
        g = prox_power_ball(_cells(dmat @ u, grid), a, p, 1e300, r)
        y = flux(g, a, p) / rho
        w = u.copy()
        s = np.zeros_like(u)
    else:
        rho = state.rho
        g, y = state.g.copy(), state.y.copy()
        w = u.copy() if u0 is not None else state.w.copy()
        s = state.s.copy()

    def pack(g, y, w, s):
        parts = [_flat(g), _flat(y)]
        if use_w:
            parts += [w, s]
        return np.concatenate(parts)

    def unpack(z):
        g = _cells(z[:nc], grid)
        y = _cells(z[nc : 2 * nc], grid)
        if use_w:
            return g, y, z[2 * nc : 2 * nc + nn], z[2 * nc + nn :]
        return g, y, w, s

    def step(z, rho):
        g, y, w, s = unpack(z)
        rhs = prob.m / rho + dmat.T @ _flat(g - y)
        if use_w:
            rhs = rhs + _SIGMA * (w - s)
        u = lu.solve(rhs)
        du = _cells(dmat @ u, grid)
        du_r = alpha * du + (1.0 - alpha) * g
        g_new = prox_power_ball(du_r + y, a, p, rho, r)
        y_new = y + du_r - g_new
        r_prim = np.sum((du - g_new) ** 2)
        r_dual = np.sum((dmat.T @ _flat(g_new - g)) ** 2)
        if use_w:
            u_r = alpha * u + (1.0 - alpha) * w
            w_new = prob.phi.prox(u_r + s, 1.0 / (rho * _SIGMA))
            s_new = s + u_r - w_new
            r_prim += _SIGMA * np.sum((u - w_new) ** 2)
            r_dual += np.sum((_SIGMA * (w_new - w)) ** 2)
        else:
            w_new, s_new = w, s
        r_prim = np.sqrt(vol * r_prim)
        r_dual = rho * np.sqrt(vol * r_dual)
        return u, pack(g_new, y_new, w_new, s_new), r_prim, r_dual

    def report(u, z, rho, it):
        g, y, _, s = unpack(z)
        mult = (rho * y, rho * _SIGMA * s if use_w else None)
        return kkt_residual(prob, a, r, u, g, mult, iterations=it, tol_kkt=opts.tol_kkt)

    def final_state(z, rho):
        g, y, w_, s_ = unpack(z)
        return _AdmmState(g.copy(), y.copy(), np.array(w_, copy=True), np.array(s_, copy=True), rho)

    z = pack(g, y, w, s)
    best = report(u, z, rho, 0)
    best_u = u.copy()
    if best.converged:
        return u, best, final_state(z, rho)

    accel = _Anderson(opts.anderson_memory) if opts.anderson_memory > 0 else None
    u, fz, r_prim, r_dual = step(z, rho)
    res = np.linalg.norm(fz - z)
    if accel:
        accel.push(fz, fz - z)

    it = 0
    for it in range(1, opts.max_iter + 1):
        # fz = F(z) holds the plain ADMM iterate; u is its primal part
        cand = accel.propose() if accel else None
        if cand is not None:
            u_c, fz_c, rp_c, rd_c = step(cand, rho)
            res_c = np.linalg.norm(fz_c - cand)
            if res_c <= res:
                z, u, fz, r_prim, r_dual, res = cand, u_c, fz_c, rp_c, rd_c, res_c
                accel.push(fz, fz - z)
                cand = "accepted"
            else:
                accel.reset()
                cand = None
        if cand is None:
            z = fz
            u, fz, r_prim, r_dual = step(z, rho)
            res = np.linalg.norm(fz - z)
            if accel:
                accel.push(fz, fz - z)

        if it % opts.check_every == 0 or it == opts.max_iter:
            rep = report(u, fz, rho, it)
            if rep.worst < best.worst or rep.converged:
                best, best_u = rep, u.copy()
            if rep.converged:
                break
        if opts.adapt_every and it % opts.adapt_every == 0 and it <= opts.adapt_until:
            # D^T carries a 1/h factor; compare residuals in cell units
            r_dual_cells = grid.h * r_dual
            fac = 1.0
            if r_prim > 10.0 * r_dual_cells:
                fac = min(np.sqrt(r_prim / max(r_dual_cells, 1e-300)), 10.0)
            elif r_dual_cells > 10.0 * r_prim:
                fac = 1.0 / min(np.sqrt(r_dual_cells / max(r_prim, 1e-300)), 10.0)
            if fac != 1.0:
                rho *= fac
                g_, y_, w_, s_ = unpack(fz)
                z = pack(g_, y_ / fac, w_, s_ / fac)
                u, fz, r_prim, r_dual = step(z, rho)
                res = np.linalg.norm(fz - z)
                if accel:
                    accel.reset()
                    accel.push(fz, fz - z)
    best = replace(best, iterations=it)
    return best_u, best, final_state(fz, rho)


def solve_vi(prob, a, r, opts=None, warm_start=None, *, _state=None, return_state=False):
    """Solve the inequality on ``K = {|Dv| <= r}`` for the coefficient ``a``.

    Returns ``(u, KktReport)``. Non-convergence is not an error: the iterate
    with the smallest worst-case residual is returned with
    ``converged=False``.
    """
    opts = opts or InnerOptions()
    grid = prob.grid
    a = check_cell_field(grid, a)
    if np.any(a <= 0):
        raise InvalidParameterError("coefficient a must be positive in every cell")
    r = check_cell_field(grid, r)
    if warm_start is not None:
        warm_start = check_node_field(grid, warm_start)
    u, rep, state = _admm(prob, a, r, opts, warm_start, _state)
    if return_state:
        return u, rep, state
    return u, rep
