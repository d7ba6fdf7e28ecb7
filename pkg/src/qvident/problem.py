"""Problem data for the mixed quasi-variational inequality.

A :class:`QviProblem` bundles the exponent ``p``, the source ``m``, the
nodewise convex term ``phi`` and the state-dependent gradient bound
``c(.)``. Only the three ``phi`` variants below are supported, each with a
closed-form proximal map.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError
from .grid import Grid, check_node_field

__all__ = [
    "PhiSpec",
    "ConstraintSpec",
    "QviProblem",
    "CheckResult",
    "ValidationReport",
    "validate",
    "phi_field_value",
]

PHI_VARIANTS = ("zero", "abs", "box")
C_VARIANTS = ("constant", "affine_clamped")


@dataclass(frozen=True)
class PhiSpec:
    """Convex, lsc scalar function ``phi: R -> R u {+inf}`` applied nodewise.

    ``zero``: ``phi = 0``; ``abs``: ``phi(s) = lam * |s|``; ``box``: indicator
    of ``[lo, hi]``.
    """

    variant: str = "zero"
    lam: float = 0.0
    lo: float = -np.inf
    hi: float = np.inf

    def __post_init__(self):
        if self.variant not in PHI_VARIANTS:
            raise InvalidConfigError(f"unknown phi variant {self.variant!r}")
        if self.variant == "abs" and not self.lam >= 0:
            raise InvalidConfigError("phi=abs requires lam >= 0")
        if self.variant == "box" and not (self.lo <= 0 <= self.hi):
            raise InvalidConfigError("phi=box requires lo <= 0 <= hi")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def abs(cls, lam):
        return cls("abs", lam=float(lam))

    @classmethod
    def box(cls, lo, hi):
        return cls("box", lo=float(lo), hi=float(hi))

    def value(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant == "zero":
            return np.zeros_like(s)
        if self.variant == "abs":
            return self.lam * np.abs(s)
        return np.where((s >= self.lo) & (s <= self.hi), 0.0, np.inf)

    def prox(self, s, t):
        """``argmin_r phi(r) + (r - s)**2 / (2 t)``, elementwise."""
        s = np.asarray(s, dtype=float)
        if self.variant == "zero":
            return s.copy()
        if self.variant == "abs":
            return np.sign(s) * np.maximum(np.abs(s) - t * self.lam, 0.0)
        return np.clip(s, self.lo, self.hi)

    @property
    def is_zero(self):
        return self.variant == "zero" or (self.variant == "abs" and self.lam == 0.0) or (
            self.variant == "box" and self.lo == -np.inf and self.hi == np.inf
        )


@dataclass(frozen=True)
class ConstraintSpec:
    """Gradient-bound data: global bound ``c0`` and the map ``s -> c(s)``.

    ``constant``: ``c(s) = alpha``. ``affine_clamped``:
    ``c(s) = clip(alpha + beta * |s|, floor, c0)``.
    """

    c0: float
    variant: str = "constant"
    alpha: float = 1.0
    beta: float = 0.0
    floor: float = 0.0

    def __post_init__(self):
        if not self.c0 > 0:
            raise InvalidConfigError("c0 must be positive")
        if self.variant not in C_VARIANTS:
            raise InvalidConfigError(f"unknown constraint variant {self.variant!r}")
        if self.variant == "constant" and not (0 < self.alpha <= self.c0):
            raise InvalidConfigError("constant c requires 0 < value <= c0")
        if self.variant == "affine_clamped" and not (0 < self.floor <= self.c0):
            raise InvalidConfigError("affine_clamped c requires 0 < floor <= c0")

    @classmethod
    def constant(cls, r, c0):
        return cls(float(c0), "constant", alpha=float(r))

    @classmethod
    def affine_clamped(cls, alpha, beta, floor, c0):
        return cls(float(c0), "affine_clamped", float(alpha), float(beta), float(floor))

    @property
    def lipschitz(self):
        return 0.0 if self.variant == "constant" else abs(self.beta)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant == "constant":
            return np.full_like(s, self.alpha)
        return np.clip(self.alpha + self.beta * np.abs(s), self.floor, self.c0)


@dataclass(frozen=True, eq=False)
class QviProblem:
    grid: Grid
    p: float
    m: np.ndarray
    phi: PhiSpec = field(default_factory=PhiSpec.zero)
    constraint: ConstraintSpec = field(default_factory=lambda: ConstraintSpec.constant(1.0, 1.0))

    def __post_init__(self):
        m = check_node_field(self.grid, self.m).copy()
        if not np.all(np.isfinite(m)):
            raise InvalidConfigError("source m must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def replace(self, **changes):
        kw = dict(grid=self.grid, p=self.p, m=self.m, phi=self.phi, constraint=self.constraint)
        kw.update(changes)
        return QviProblem(**kw)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate(prob):
    """Report on the configuration-time checkable hypotheses. Never raises."""
    checks = []
    checks.append(CheckResult("p>1", bool(prob.p > 1), f"p={prob.p}"))

    s = np.linspace(-10.0, 10.0, 1001)
    cs = prob.constraint(s)
    ok = bool(np.all(cs > 0) and np.all(cs <= prob.constraint.c0))
    checks.append(
        CheckResult("0<c(s)<=c0", ok, f"min c={cs.min():.6g}, max c={cs.max():.6g}, c0={prob.constraint.c0}")
    )

    # |u| <= c0 on the unit domain for every u in C (diameter bound 1)
    phi = prob.phi
    bound = prob.constraint.c0 * 1.0
    if phi.variant == "box":
        ok = bool(phi.lo < -bound and bound < phi.hi)
        detail = f"[-{bound}, {bound}] vs ({phi.lo}, {phi.hi})"
    else:
        ok, detail = True, "dom phi = R"
    checks.append(CheckResult("C in int(dom phi)", ok, detail))

    checks.append(CheckResult("m finite", bool(np.all(np.isfinite(prob.m))), ""))
    return ValidationReport(tuple(checks))


def phi_field_value(prob, u):
    """Nodal quadrature of ``int phi(u)``; ``+inf`` outside ``dom phi``."""
    u = check_node_field(prob.grid, u)
    vals = prob.phi.value(u)
    if not np.all(np.isfinite(vals)):
        return np.inf
    return float(np.sum(vals) * prob.grid.cell_volume)
