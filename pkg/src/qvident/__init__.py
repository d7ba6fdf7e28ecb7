"""Solvers for implicit gradient-obstacle quasi-variational inequalities of
p-Laplacian type and TV-regularized identification of their coefficient."""

from .constraint import is_feasible, project_gradient, radii_of, sample_feasible
from .errors import (
    AllEvaluationsDivergedError,
    GridMismatchError,
    InvalidConfigError,
    InvalidParameterError,
    QviError,
)
from .grid import Grid, dual_pairing, gradient, make_grid, norm_lp_vector
from .inner_solver import InnerOptions, KktReport, kkt_residual, solve_vi
from .inverse import (
    AdmissibleSet,
    InverseConfig,
    PatternSearchOptions,
    expand_blocks,
    identify,
    kappa_sweep,
    misfit,
    objective_J,
    tv,
    tv_lower_bound_gap,
)
from .operator import apply_T, check_linear_in_a, check_monotone, energy, hoelder_bound_gap
from .problem import ConstraintSpec, PhiSpec, QviProblem, phi_field_value, validate
from .qvi import MintyReport, QviOptions, SolveReport, minty_check, solve_qvi

__version__ = "0.1.0"
