"""Fixed-point iteration over the variational selection, and Minty checks."""

import time
from dataclasses import dataclass, field

import numpy as np

from .constraint import is_feasible, radii_of, sample_feasible
from .errors import InvalidConfigError
from .grid import check_node_field, dual_pairing, gradient
from .inner_solver import InnerOptions, KktReport, solve_vi
from .operator import apply_T
from .problem import phi_field_value

__all__ = ["QviOptions", "SolveReport", "MintyReport", "solve_qvi", "minty_check", "SELECTION_RULE"]

SELECTION_RULE = "picard-from-init"


@dataclass(frozen=True)
class QviOptions:
    inner: InnerOptions = field(default_factory=InnerOptions)
    max_outer: int = 100
    tol_fp: float = 1e-8
    init: np.ndarray = None
    minty_samples: int = 0
    minty_seed: int = 0

    def __post_init__(self):
        if self.max_outer < 1:
            raise InvalidConfigError("max_outer must be >= 1")
        if not self.tol_fp > 0:
            raise InvalidConfigError("tol_fp must be positive")


@dataclass(frozen=True)
class MintyReport:
    min_slack: float
    min_relative_slack: float
    worst_v_index: int
    scale: float
    self_violation: float
    samples: int

    def passed(self, tol=1e-6, feas_tol=1e-6):
        """One-sided test: every sampled slack is ``>= -tol * scale`` and ``u in K(u)``."""
        return self.min_relative_slack >= -tol and self.self_violation <= feas_tol


@dataclass(frozen=True)
class SolveReport:
    outer_iterations: int
    fp_residual_history: tuple
    inner: KktReport
    inner_iterations_total: int
    self_feasibility_violation: float
    minty: MintyReport
    converged: bool
    selection: str = SELECTION_RULE
    wall_time: float = field(default=0.0, compare=False)

    @property
    def fp_residual(self):
        return self.fp_residual_history[-1] if self.fp_residual_history else np.inf


def _l2(grid, v):
    return float(np.sqrt(grid.cell_volume * np.dot(v, v)))


def self_violation(prob, u):
    """``max(|Du| - c(u))`` clipped at zero: distance from ``u in K(u)``."""
    _, viol = is_feasible(prob.grid, u, radii_of(prob, u), 0.0)
    return max(viol, 0.0)


def solve_qvi(prob, a, opts=None):
    """Picard iteration ``u_{k+1} = S_a(u_k)`` from ``opts.init`` (default zero).

    Each step solves the inequality on ``K(u_k)`` warm-started from the
    previous step. The run is converged once the fixed-point increment is at
    most ``tol_fp``, ``u`` lies in ``K(u)`` within ``inner.tol_kkt`` and the
    last inner solve is certified. Returns ``(u, SolveReport)``.
    """
    opts = opts or QviOptions()
    grid = prob.grid
    t0 = time.perf_counter()
    u = grid.zeros_node() if opts.init is None else check_node_field(grid, opts.init).copy()
    state = None
    history = []
    total_inner = 0
    converged = False
    rep = None
    viol = np.inf
    for _ in range(opts.max_outer):
        r = radii_of(prob, u)
        u_new, rep, state = solve_vi(prob, a, r, opts.inner, warm_start=u, _state=state, return_state=True)
        total_inner += rep.iterations
        history.append(_l2(grid, u_new - u))
        u = u_new
        viol = self_violation(prob, u)
        if history[-1] <= opts.tol_fp and viol <= opts.inner.tol_kkt and rep.converged:
            converged = True
            break
    minty = None
    if opts.minty_samples > 0:
        minty = minty_check(prob, a, u, opts.minty_samples, opts.minty_seed)
    report = SolveReport(
        outer_iterations=len(history),
        fp_residual_history=tuple(history),
        inner=rep,
        inner_iterations_total=total_inner,
        self_feasibility_violation=viol,
        minty=minty,
        converged=converged,
        wall_time=time.perf_counter() - t0,
    )
    return u, report


def _scale_into(grid, q, r):
    mags = np.linalg.norm(gradient(grid, q), axis=1)
    s = min(1.0, float(np.min(r / (mags + 1e-14))))
    if s < 1.0:
        s *= 1.0 - 1e-12
    return s * q


def _smooth_fields(grid, rng, count):
    x = grid.node_coordinates()
    out = []
    for _ in range(count):
        q = np.zeros(grid.interior_node_count)
        for _ in range(3):
            k = rng.integers(1, 4, size=grid.dim)
            q += rng.normal() * np.prod(np.sin(np.pi * k * x), axis=1)
        out.append(q)
    return out


def minty_check(prob, a, u, samples=200, seed=0):
    """Falsification test of the Minty form of the inequality at ``u``.

    Test points are ``v = b + t (q - b)`` with ``b = u`` (or ``u`` scaled into
    ``K(u)`` when it is infeasible), ``q`` a seeded feasible field (white
    noise or a smooth sine mode, alternating) and ``t`` cycling over
    ``1, 0.1, 0.01, 0.001``; ``u`` itself is the first point when feasible.
    Every ``v`` lies in ``K(u)`` by convexity. For each one the slack
    ``<T(a,v), v-u> + phi(v) - phi(u) - <m, v-u>`` is evaluated.
    """
    if samples < 1:
        raise InvalidConfigError("samples must be >= 1")
    grid = prob.grid
    u = check_node_field(grid, u)
    r = radii_of(prob, u)
    feasible, viol = is_feasible(grid, u, r, 0.0)
    base = u if feasible else _scale_into(grid, u, r)

    rng = np.random.default_rng(seed)
    n_draw = samples - 1 if feasible else samples
    n_noise = (n_draw + 1) // 2
    noise = sample_feasible(grid, r, int(rng.integers(2**32)), n_noise) if n_noise else []
    smooth = [_scale_into(grid, q, r) for q in _smooth_fields(grid, rng, n_draw - n_noise)]
    qs = []
    for k in range(n_draw):
        qs.append(noise[k // 2] if k % 2 == 0 else smooth[k // 2])
    steps = (1.0, 0.1, 0.01, 0.001)
    vs = [u] if feasible else []
    vs += [base + steps[k % 4] * (q - base) for k, q in enumerate(qs)]

    phi_u = phi_field_value(prob, u)
    slacks, scales = [], []
    for v in vs:
        d = v - u
        t_term = apply_T(prob, a, v, d)
        phi_v = phi_field_value(prob, v)
        m_term = dual_pairing(grid, prob.m, d)
        slacks.append(t_term + phi_v - phi_u - m_term)
        scales.append(1.0 + abs(t_term) + abs(phi_v) + abs(phi_u) + abs(m_term))
    slacks = np.asarray(slacks)
    scales = np.asarray(scales)
    rel = slacks / scales
    worst = int(np.argmin(rel))
    return MintyReport(
        min_slack=float(slacks.min()),
        min_relative_slack=float(rel[worst]),
        worst_v_index=worst,
        scale=float(scales.max()),
        self_violation=max(viol, 0.0),
        samples=len(vs),
    )
