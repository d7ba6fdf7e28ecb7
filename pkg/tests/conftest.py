import numpy as np
import pytest

from qvident import ConstraintSpec, PhiSpec, QviProblem, make_grid

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_problem(dim=1, n=2, p=2.0, m=1.0, phi=None, constraint=None):
    grid = make_grid(dim, n)
    if np.isscalar(m):
        m = np.full(grid.interior_node_count, float(m))
    return QviProblem(
        grid,
        p,
        m,
        phi=phi or PhiSpec.zero(),
        constraint=constraint or ConstraintSpec.constant(1.0, 1.0),
    )


def shipped_constraint():
    return ConstraintSpec.affine_clamped(0.5, 0.25, 0.1, 1.0)


def random_problem(rng, dim, n, p, phi=None, m_scale=6.0):
    """Randomized instance with an active, state-dependent gradient bound."""
    grid = make_grid(dim, n)
    m = rng.uniform(0.0, m_scale, grid.interior_node_count)
    cons = ConstraintSpec.affine_clamped(rng.uniform(0.2, 0.5), rng.uniform(0.0, 0.5), 0.1, 1.0)
    a = rng.uniform(0.5, 2.0, grid.cell_count)
    return QviProblem(grid, p, m, phi=phi or PhiSpec.zero(), constraint=cons), a
