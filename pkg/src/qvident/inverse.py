"""Coefficient identification by TV-regularized output least squares.

The objective is ``J(a) = misfit(u(a), z) + kappa * TV(a)`` where ``u(a)`` is
the deterministic solution selection returned by :func:`qvident.qvi.solve_qvi`
(Picard iteration from the zero field). It is minimized over block-constant
coefficients in ``{c1 <= a <= c2, TV(a) <= c3}`` by a projected
compass/pattern search.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import AllEvaluationsDivergedError, InvalidConfigError
from .grid import check_cell_field, check_node_field, check_vector_field, gradient, norm_lp_vector
from .qvi import QviOptions, solve_qvi

__all__ = [
    "AdmissibleSet",
    "PatternSearchOptions",
    "InverseConfig",
    "HistoryRow",
    "IdentHistory",
    "SweepRow",
    "tv",
    "l1_norm",
    "tv_lower_bound_gap",
    "misfit",
    "objective_J",
    "expand_blocks",
    "identify",
    "kappa_sweep",
    "digest",
]


@dataclass(frozen=True)
class AdmissibleSet:
    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        if not (0 < self.c1 <= self.c2):
            raise InvalidConfigError("admissible set requires 0 < c1 <= c2")
        if not self.c3 > 0:
            raise InvalidConfigError("admissible set requires c3 > 0")

    def contains(self, grid, a):
        a = check_cell_field(grid, a)
        return bool(np.all(a >= self.c1) and np.all(a <= self.c2) and tv(grid, a) <= self.c3)

    @property
    def midpoint(self):
        return 0.5 * (self.c1 + self.c2)


@dataclass(frozen=True)
class PatternSearchOptions:
    max_evals: int = 500
    step_init: float = None  # default: (c2 - c1) / 4
    step_min: float = 1e-4
    shrink: float = 0.5

    def __post_init__(self):
        if self.max_evals < 1:
            raise InvalidConfigError("max_evals must be >= 1")
        if not 0 < self.shrink < 1:
            raise InvalidConfigError("shrink must lie in (0, 1)")
        if not self.step_min > 0:
            raise InvalidConfigError("step_min must be positive")


@dataclass(frozen=True, eq=False)
class InverseConfig:
    kappa: float
    misfit_mode: str
    z: np.ndarray
    block_size: int = 1
    optimizer: PatternSearchOptions = field(default_factory=PatternSearchOptions)
    qvi_opts: QviOptions = field(default_factory=QviOptions)

    def __post_init__(self):
        # kappa = 0 is accepted for noise-free recovery studies
        if not self.kappa >= 0:
            raise InvalidConfigError("kappa must be >= 0")
        if self.misfit_mode not in ("state", "gradient"):
            raise InvalidConfigError(f"unknown misfit mode {self.misfit_mode!r}")
        if self.block_size < 1:
            raise InvalidConfigError("block_size must be >= 1")

    def replace(self, **changes):
        kw = dict(
            kappa=self.kappa,
            misfit_mode=self.misfit_mode,
            z=self.z,
            block_size=self.block_size,
            optimizer=self.optimizer,
            qvi_opts=self.qvi_opts,
        )
        kw.update(changes)
        return InverseConfig(**kw)


@dataclass(frozen=True)
class HistoryRow:
    eval_index: int
    a_digest: str
    J: float
    misfit: float
    tv: float
    qvi_converged: bool


class IdentHistory(list):
    """Evaluation log of an identification run (a list of :class:`HistoryRow`)."""

    @property
    def values(self):
        return np.array([row.J for row in self])


@dataclass(frozen=True)
class SweepRow:
    kappa: float
    J: float
    misfit: float
    tv: float
    a_digest: str
    ok: bool
    a: np.ndarray = field(default=None, repr=False, compare=False)
    evaluations: int = 0
    error: str = ""


def digest(a):
    return hashlib.sha256(np.ascontiguousarray(a, dtype=float).tobytes()).hexdigest()[:16]


def tv(grid, a):
    """Anisotropic discrete total variation of a piecewise-constant cell field.

    1D sums the jumps between neighbouring cells; 2D sums the jumps across
    every interior face weighted by the face length ``h``.
    """
    a = check_cell_field(grid, a)
    if grid.dim == 1:
        return float(np.sum(np.abs(np.diff(a))))
    a2 = a.reshape(grid.n, grid.n)
    jumps = np.sum(np.abs(np.diff(a2, axis=0))) + np.sum(np.abs(np.diff(a2, axis=1)))
    return float(jumps * grid.h)


def l1_norm(grid, a):
    a = check_cell_field(grid, a)
    return float(np.sum(np.abs(a)) * grid.cell_volume)


def tv_lower_bound_gap(grid, a, adm):
    """``TV(a) - (||a||_BV - c2 |Omega|)``, nonnegative for ``a <= c2``."""
    a = check_cell_field(grid, a)
    if np.any(a < adm.c1) or np.any(a > adm.c2):
        raise InvalidConfigError("a must satisfy c1 <= a <= c2 cellwise")
    t = tv(grid, a)
    bv = l1_norm(grid, a) + t
    return t - (bv - adm.c2 * 1.0)


def misfit(grid, u, cfg, p):
    """Output misfit: ``0.5 ||u - z||^2_{L2}`` (state) or ``||Du - z||_{L^p}`` (gradient)."""
    if cfg.misfit_mode == "state":
        d = check_node_field(grid, u) - check_node_field(grid, cfg.z)
        return float(0.5 * np.dot(d, d) * grid.cell_volume)
    z = check_vector_field(grid, cfg.z)
    return norm_lp_vector(grid, gradient(grid, u) - z, p)


def objective_J(prob, a, cfg, history=None):
    """Evaluate ``J`` at ``a``. Returns ``(J, u, SolveReport)``.

    A non-converged forward solve is not an error; the row appended to
    ``history`` carries ``qvi_converged=False``.
    """
    a = check_cell_field(prob.grid, a)
    u, report = solve_qvi(prob, a, cfg.qvi_opts)
    mis = misfit(prob.grid, u, cfg, prob.p)
    t = tv(prob.grid, a)
    J = mis + cfg.kappa * t
    if history is not None:
        history.append(HistoryRow(len(history), digest(a), J, mis, t, report.converged))
    return J, u, report


def expand_blocks(grid, values, block_size):
    """Cell field that is constant on ``block_size``-wide blocks (squares in 2D)."""
    nb = grid.n // block_size
    values = np.asarray(values, dtype=float)
    if grid.dim == 1:
        return np.repeat(values, block_size)
    return np.kron(values.reshape(nb, nb), np.ones((block_size, block_size))).ravel()


def _block_means(grid, a, block_size):
    nb = grid.n // block_size
    if grid.dim == 1:
        return a.reshape(nb, block_size).mean(axis=1)
    return a.reshape(nb, block_size, nb, block_size).mean(axis=(1, 3)).ravel()


def identify(prob, cfg, adm, a_init=None):
    """Projected pattern search for ``argmin_{a in A} J(a)`` over block values.

    Each sweep perturbs every block value by ``+step`` then ``-step``
    (clamped to ``[c1, c2]``), discards candidates with ``TV > c3`` and
    moves on the first strict decrease. A sweep without improvement shrinks
    the step. The search stops when ``step < step_min`` or the evaluation
    budget is spent; the start is the midpoint ``(c1 + c2) / 2`` unless
    ``a_init`` is given. Returns ``(a_out, IdentHistory)``.
    """
    grid = prob.grid
    bs = cfg.block_size
    if grid.n % bs:
        raise InvalidConfigError(f"block_size {bs} does not divide n={grid.n}")
    opt = cfg.optimizer
    if a_init is None:
        b = np.full((grid.n // bs) ** grid.dim, adm.midpoint)
    else:
        b = _block_means(grid, check_cell_field(grid, a_init), bs)
    b = np.clip(b, adm.c1, adm.c2)
    if tv(grid, expand_blocks(grid, b, bs)) > adm.c3:
        raise InvalidConfigError("initial coefficient violates the TV budget c3")

    history = IdentHistory()
    cache = {}

    def evaluate(vals):
        key = vals.tobytes()
        if key not in cache:
            J, _, rep = objective_J(prob, expand_blocks(grid, vals, bs), cfg, history)
            cache[key] = J if rep.converged else np.inf
        return cache[key]

    best = evaluate(b)
    step = opt.step_init if opt.step_init is not None else 0.25 * (adm.c2 - adm.c1)
    # J >= 0, so a zero objective cannot be improved
    while best > 0 and step >= opt.step_min and len(history) < opt.max_evals:
        improved = False
        for i in range(b.size):
            for sign in (1.0, -1.0):
                cand = b.copy()
                cand[i] = min(max(b[i] + sign * step, adm.c1), adm.c2)
                if cand[i] == b[i]:
                    continue
                if tv(grid, expand_blocks(grid, cand, bs)) > adm.c3:
                    continue
                if len(history) >= opt.max_evals:
                    break
                J = evaluate(cand)
                if J < best:
                    b, best, improved = cand, J, True
                    break
        if not improved:
            step *= opt.shrink

    if history and not any(row.qvi_converged for row in history):
        raise AllEvaluationsDivergedError("no objective evaluation converged", history)
    return expand_blocks(grid, b, bs), history


def kappa_sweep(prob, cfg, adm, kappas, a_init=None):
    """Run :func:`identify` once per ``kappa`` (input order) on shared data."""
    kappas = list(kappas)
    if not kappas:
        raise InvalidConfigError("kappa list is empty")
    rows = []
    for k in kappas:
        try:
            a_out, hist = identify(prob, cfg.replace(kappa=float(k)), adm, a_init=a_init)
        except AllEvaluationsDivergedError as exc:
            rows.append(SweepRow(float(k), np.nan, np.nan, np.nan, "", False, error=str(exc)))
            continue
        except InvalidConfigError as exc:
            rows.append(SweepRow(float(k), np.nan, np.nan, np.nan, "", False, error=str(exc)))
            continue
        d = digest(a_out)
        final = min((r for r in hist if r.a_digest == d), key=lambda r: r.eval_index)
        rows.append(SweepRow(float(k), final.J, final.misfit, final.tv, d, final.qvi_converged, a_out, len(hist)))
    return rows
