"""Auditing a computed solution with the Minty inequality.

For a monotone operator, ``u`` solves the inequality iff for every
admissible ``v``

    <T(a, v), v - u> + phi(v) - phi(u) - <m, v - u>  >=  0.

The left side only needs ``T`` at the test point, so it gives a check that
is independent of the solver. Sampling ``v`` cannot prove ``u`` is a
solution, but a single negative slack disproves it.
"""

import numpy as np

from qvident import ConstraintSpec, PhiSpec, QviProblem, make_grid, minty_check, solve_qvi

grid = make_grid(1, 32)
rng = np.random.default_rng(3)
prob = QviProblem(
    grid,
    1.5,
    rng.uniform(0, 6, grid.interior_node_count),
    phi=PhiSpec.abs(0.2),
    constraint=ConstraintSpec.affine_clamped(0.4, 0.3, 0.1, 1.0),
)
a = rng.uniform(0.5, 2.0, grid.cell_count)
u, rep = solve_qvi(prob, a)
print("solver certificate:", rep.converged, f"(inner KKT worst residual {rep.inner.worst:.1e})")

mr = minty_check(prob, a, u, samples=400, seed=0)
print(f"computed solution: min relative slack {mr.min_relative_slack:+.2e} over {mr.samples} samples -> "
      f"{'PASS' if mr.passed() else 'FAIL'}")

# small perturbations slip through: the test is one-sided by construction
for eps in (1e-2, 1e-4, 1e-6):
    bad = u.copy()
    bad[grid.interior_node_count // 2] += eps
    mr = minty_check(prob, a, bad, samples=400, seed=0)
    print(f"u + {eps:.0e} at the midpoint: min relative slack {mr.min_relative_slack:+.2e}, "
          f"self-violation {mr.self_violation:.1e} -> {'PASS' if mr.passed() else 'FAIL'}")
