"""Plain-text field files, run configuration, reports and synthetic data.

Field file layout::

    # kind: node
    # dim: 1
    # n: 4
    0,0.25
    1,0.5
    2,0.25

Vector fields carry ``dim`` value columns. Floats are written with 17
significant digits so ``read_field(write_field(x))`` is bit-exact.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError
from .grid import Grid, gradient
from .inner_solver import InnerOptions
from .inverse import AdmissibleSet, InverseConfig, PatternSearchOptions
from .problem import ConstraintSpec, PhiSpec, QviProblem
from .qvi import QviOptions, solve_qvi

__all__ = [
    "FieldFile",
    "write_field",
    "read_field",
    "RunConfig",
    "load_config",
    "parse_config",
    "format_report",
    "parse_report",
    "synthesize",
]

KINDS = ("node", "cell", "vector")

_INT_KEYS = {
    "problem.dim",
    "problem.n",
    "inverse.block_size",
    "solver.max_inner",
    "solver.max_outer",
    "solver.max_evals",
    "solver.seed",
}
_STR_KEYS = {
    "problem.phi",
    "problem.c_variant",
    "problem.m_file",
    "inverse.misfit_mode",
    "inverse.z_file",
}
_FLOAT_KEYS = {
    "problem.p",
    "problem.phi_lambda",
    "problem.phi_lo",
    "problem.phi_hi",
    "problem.c_alpha",
    "problem.c_beta",
    "problem.c_floor",
    "problem.c0",
    "problem.m_const",
    "admissible.c1",
    "admissible.c2",
    "admissible.c3",
    "inverse.kappa",
    "solver.tol_kkt",
    "solver.tol_fp",
    "solver.step_init",
    "solver.step_min",
}
KNOWN_KEYS = _INT_KEYS | _STR_KEYS | _FLOAT_KEYS
_PATH_KEYS = {"problem.m_file", "inverse.z_file"}


@dataclass(frozen=True, eq=False)
class FieldFile:
    kind: str
    grid: Grid
    values: np.ndarray
    header: dict


def _expected_shape(kind, grid):
    if kind == "node":
        return (grid.interior_node_count,)
    if kind == "cell":
        return (grid.cell_count,)
    return (grid.cell_count, grid.dim)


def write_field(path, kind, grid, values, header=None):
    if kind not in KINDS:
        raise InvalidConfigError(f"unknown field kind {kind!r}")
    values = np.asarray(values, dtype=float)
    if values.shape != _expected_shape(kind, grid):
        raise InvalidConfigError(f"{kind} field shape {values.shape} does not match {grid}")
    if not np.all(np.isfinite(values)):
        raise InvalidConfigError("field values must be finite")
    lines = [f"# kind: {kind}", f"# dim: {grid.dim}", f"# n: {grid.n}"]
    for key, val in (header or {}).items():
        lines.append(f"# {key}: {val}")
    rows = values.reshape(values.shape[0], -1)
    for i, row in enumerate(rows):
        lines.append(",".join([str(i)] + ["%.17g" % v for v in row]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path, expect_kind=None):
    header = {}
    rows = []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, sep, val = line[1:].partition(":")
                    if sep:
                        header[key.strip()] = val.strip()
                    continue
                rows.append(line.split(","))
    except OSError as exc:
        raise InvalidConfigError(f"cannot read field file {path}: {exc}") from exc
    try:
        kind = header["kind"]
        grid = Grid(int(header["dim"]), int(header["n"]))
    except KeyError as exc:
        raise InvalidConfigError(f"field file {path} lacks header {exc.args[0]!r}") from None
    except ValueError as exc:
        raise InvalidConfigError(f"field file {path}: bad header ({exc})") from None
    if kind not in KINDS:
        raise InvalidConfigError(f"field file {path}: unknown kind {kind!r}")
    if expect_kind is not None and kind != expect_kind:
        raise InvalidConfigError(f"field file {path}: expected {expect_kind} field, found {kind}")
    shape = _expected_shape(kind, grid)
    width = 1 if kind != "vector" else grid.dim
    if len(rows) != shape[0]:
        raise InvalidConfigError(f"field file {path}: {len(rows)} rows, header implies {shape[0]}")
    try:
        idx = [int(r[0]) for r in rows]
        data = np.array([[float(x) for x in r[1:]] for r in rows])
    except (ValueError, IndexError) as exc:
        raise InvalidConfigError(f"field file {path}: malformed row ({exc})") from None
    if idx != list(range(shape[0])) or data.shape != (shape[0], width):
        raise InvalidConfigError(f"field file {path}: rows are not indexed 0..{shape[0] - 1} with {width} values")
    if not np.all(np.isfinite(data)):
        raise InvalidConfigError(f"field file {path}: non-finite values")
    values = data.reshape(shape)
    return FieldFile(kind, grid, values, header)


class RunConfig(dict):
    """Flat ``section.key -> value`` mapping with typed accessors."""

    def __init__(self, values, base_dir="."):
        super().__init__(values)
        self.base_dir = base_dir

    def require(self, key):
        if key not in self:
            raise InvalidConfigError(f"missing required config key {key!r}")
        return self[key]

    def path(self, key):
        return os.path.join(self.base_dir, self.require(key))

    # -- builders -----------------------------------------------------------

    def grid(self):
        return Grid(self.require("problem.dim"), self.require("problem.n"))

    def problem(self):
        grid = self.grid()
        phi_variant = self.get("problem.phi", "zero")
        if phi_variant == "zero":
            phi = PhiSpec.zero()
        elif phi_variant == "abs":
            phi = PhiSpec.abs(self.require("problem.phi_lambda"))
        elif phi_variant == "box":
            phi = PhiSpec.box(self.require("problem.phi_lo"), self.require("problem.phi_hi"))
        else:
            raise InvalidConfigError(f"problem.phi: unknown variant {phi_variant!r}")

        c0 = self.require("problem.c0")
        variant = self.require("problem.c_variant")
        if variant == "constant":
            cons = ConstraintSpec.constant(self.require("problem.c_alpha"), c0)
        elif variant == "affine_clamped":
            cons = ConstraintSpec.affine_clamped(
                self.require("problem.c_alpha"),
                self.require("problem.c_beta"),
                self.require("problem.c_floor"),
                c0,
            )
        else:
            raise InvalidConfigError(f"problem.c_variant: unknown variant {variant!r}")

        has_file, has_const = "problem.m_file" in self, "problem.m_const" in self
        if has_file == has_const:
            raise InvalidConfigError("exactly one of 'problem.m_file' and 'problem.m_const' is required")
        if has_file:
            ff = read_field(self.path("problem.m_file"), "node")
            if ff.grid != grid:
                raise InvalidConfigError("problem.m_file grid does not match problem.dim/problem.n")
            m = ff.values
        else:
            m = np.full(grid.interior_node_count, self["problem.m_const"])
        return QviProblem(grid, self.require("problem.p"), m, phi=phi, constraint=cons)

    def admissible(self):
        return AdmissibleSet(
            self.require("admissible.c1"), self.require("admissible.c2"), self.require("admissible.c3")
        )

    def has_admissible(self):
        return all(k in self for k in ("admissible.c1", "admissible.c2", "admissible.c3"))

    @property
    def seed(self):
        return self.get("solver.seed", 0)

    def qvi_options(self):
        inner = InnerOptions(
            max_iter=self.get("solver.max_inner", InnerOptions.max_iter),
            tol_kkt=self.get("solver.tol_kkt", InnerOptions.tol_kkt),
        )
        return QviOptions(
            inner=inner,
            max_outer=self.get("solver.max_outer", QviOptions.max_outer),
            tol_fp=self.get("solver.tol_fp", QviOptions.tol_fp),
        )

    def misfit_mode(self):
        return self.require("inverse.misfit_mode")

    def inverse(self, grid):
        mode = self.misfit_mode()
        kind = "node" if mode == "state" else "vector"
        zf = read_field(self.path("inverse.z_file"), kind)
        if zf.grid != grid:
            raise InvalidConfigError("inverse.z_file grid does not match the problem grid")
        opt = PatternSearchOptions(
            max_evals=self.get("solver.max_evals", PatternSearchOptions.max_evals),
            step_init=self.get("solver.step_init"),
            step_min=self.get("solver.step_min", PatternSearchOptions.step_min),
        )
        return InverseConfig(
            kappa=self.require("inverse.kappa"),
            misfit_mode=mode,
            z=zf.values,
            block_size=self.get("inverse.block_size", 1),
            optimizer=opt,
            qvi_opts=self.qvi_options(),
        )


def _convert(key, raw):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise InvalidConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw


def parse_config(text, base_dir="."):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise InvalidConfigError(f"config line {lineno}: expected key=value")
        if key not in KNOWN_KEYS:
            raise InvalidConfigError(f"unknown config key {key!r} (line {lineno})")
        if key in values:
            raise InvalidConfigError(f"duplicate config key {key!r} (line {lineno})")
        values[key] = _convert(key, raw)
    return RunConfig(values, base_dir)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def format_report(report):
    """``key: value`` lines for a :class:`~qvident.qvi.SolveReport` (wall time excluded)."""
    inner = report.inner
    lines = [
        ("converged", report.converged),
        ("outer_iterations", report.outer_iterations),
        ("fp_residual", report.fp_residual),
        ("fp_residual_history", ",".join(_fmt(v) for v in report.fp_residual_history)),
        ("self_feasibility_violation", report.self_feasibility_violation),
        ("inner_iterations_total", report.inner_iterations_total),
        ("inner_iterations", inner.iterations),
        ("inner_primal_residual", inner.primal_residual),
        ("inner_stationarity_residual", inner.stationarity_residual),
        ("inner_feasibility_violation", inner.feasibility_violation),
        ("inner_converged", inner.converged),
        ("tol_kkt", inner.tol_kkt),
        ("selection", report.selection),
    ]
    if report.minty is not None:
        lines += [
            ("minty_min_slack", report.minty.min_slack),
            ("minty_min_relative_slack", report.minty.min_relative_slack),
            ("minty_samples", report.minty.samples),
        ]
    return "".join(f"{k}: {v if isinstance(v, str) else _fmt(v)}\n" for k, v in lines)


def parse_report(text):
    out = {}
    for line in text.splitlines():
        key, sep, val = line.partition(":")
        if sep:
            out[key.strip()] = val.strip()
    return out


def synthesize(prob, a_true, mode, sigma, seed, qvi_opts=None):
    """Forward-solve at ``a_true`` and add seeded ``N(0, sigma^2)`` noise per entry.

    Returns ``(z, clean, SolveReport)``; ``z`` is a node field for the state
    mode and a vector field for the gradient mode.
    """
    if sigma < 0:
        raise InvalidConfigError("sigma must be >= 0")
    if mode not in ("state", "gradient"):
        raise InvalidConfigError(f"unknown misfit mode {mode!r}")
    u, report = solve_qvi(prob, a_true, qvi_opts)
    clean = u if mode == "state" else gradient(prob.grid, u)
    rng = np.random.default_rng(seed)
    z = clean + sigma * rng.standard_normal(clean.shape) if sigma > 0 else clean.copy()
    return z, clean, report
