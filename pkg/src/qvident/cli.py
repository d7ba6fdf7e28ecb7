"""Command-line interface: ``qvident {synth,forward,invert,verify,sweep}``.

Exit codes: 0 success, 1 verification failed, 2 solver non-convergence,
3 invalid input.
"""

import argparse
import logging
import sys

import numpy as np

from .constraint import radii_of
from .errors import AllEvaluationsDivergedError, InvalidConfigError, QviError
from .inverse import digest, identify, kappa_sweep, tv_lower_bound_gap
from .io import format_report, load_config, read_field, synthesize, write_field
from .operator import check_linear_in_a, check_monotone, hoelder_bound_gap
from .problem import validate
from .qvi import minty_check, solve_qvi

log = logging.getLogger("qvident")

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_NOT_CONVERGED, EXIT_INVALID = 0, 1, 2, 3


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg["solver.seed"] = args.seed
    prob = cfg.problem()
    rep = validate(prob)
    if not rep.passed:
        raise InvalidConfigError(f"problem validation failed: {', '.join(rep.failed())}")
    return cfg, prob


def _read_coefficient(path, grid):
    ff = read_field(path, "cell")
    if ff.grid != grid:
        raise InvalidConfigError(f"{path}: grid does not match the configured problem")
    if np.any(ff.values <= 0):
        raise InvalidConfigError(f"{path}: coefficient must be positive")
    return ff.values


def cmd_synth(args):
    cfg, prob = _load(args)
    a_true = _read_coefficient(args.a_true, prob.grid)
    if cfg.has_admissible() and not cfg.admissible().contains(prob.grid, a_true):
        raise InvalidConfigError(f"{args.a_true}: a_true is not admissible")
    mode = cfg.misfit_mode()
    z, _, report = synthesize(prob, a_true, mode, args.sigma, cfg.seed, cfg.qvi_options())
    if not report.converged:
        log.error("forward solve at a_true did not converge")
        return EXIT_NOT_CONVERGED
    kind = "node" if mode == "state" else "vector"
    write_field(args.out, kind, prob.grid, z, {"seed": cfg.seed, "sigma": "%.17g" % args.sigma, "mode": mode})
    return EXIT_OK


def cmd_forward(args):
    cfg, prob = _load(args)
    a = _read_coefficient(args.a, prob.grid)
    u, report = solve_qvi(prob, a, cfg.qvi_options())
    write_field(args.out, "node", prob.grid, u)
    with open(args.report, "w") as fh:
        fh.write(format_report(report))
    log.info("forward: %d outer iterations, %.3fs", report.outer_iterations, report.wall_time)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_invert(args):
    cfg, prob = _load(args)
    adm = cfg.admissible()
    inv = cfg.inverse(prob.grid)
    try:
        a_out, history = identify(prob, inv, adm)
    except AllEvaluationsDivergedError as exc:
        log.error("%s", exc)
        return EXIT_NOT_CONVERGED
    write_field(args.out, "cell", prob.grid, a_out, {"kappa": "%.17g" % inv.kappa})
    with open(args.history, "w") as fh:
        fh.write("eval,J,misfit,tv,converged\n")
        for row in history:
            fh.write(f"{row.eval_index},{row.J:.17g},{row.misfit:.17g},{row.tv:.17g},{int(row.qvi_converged)}\n")
    return EXIT_OK


def _verify_rows(cfg, prob, a, u, samples, seed):
    grid = prob.grid
    rng = np.random.default_rng(seed)
    tol_feas = cfg.qvi_options().inner.tol_kkt
    rows = []

    mr = minty_check(prob, a, u, samples, seed)
    rows.append(("minty_min_relative_slack", mr.min_relative_slack, -1e-6, mr.min_relative_slack >= -1e-6))
    rows.append(("self_feasibility_violation", mr.self_violation, tol_feas, mr.self_violation <= tol_feas))

    r = radii_of(prob, u)
    worst_mono, worst_lin, worst_hoelder = np.inf, 0.0, np.inf
    a_lo, a_hi = float(a.min()), float(a.max())
    for _ in range(samples):
        v = rng.uniform(-1.0, 1.0, grid.interior_node_count) * float(r.max())
        scale = (1.0 + np.linalg.norm(u) + np.linalg.norm(v)) ** prob.p
        worst_mono = min(worst_mono, check_monotone(prob, a, u, v) / scale)
        b = rng.uniform(a_lo, a_hi, grid.cell_count)
        lin_scale = scale * (1.0 + np.abs(a).max() + np.abs(b).max())
        worst_lin = max(worst_lin, check_linear_in_a(prob, a, b, u, v) / lin_scale)
        worst_hoelder = min(worst_hoelder, hoelder_bound_gap(prob, a, b, u, v) / lin_scale)
    rows.append(("monotone_min_scaled", worst_mono, -1e-12, worst_mono >= -1e-12))
    rows.append(("linear_in_a_max_scaled", worst_lin, 1e-12, worst_lin <= 1e-12))
    self_gap = hoelder_bound_gap(prob, a, a, u, u)
    rows.append(("hoelder_self_gap", self_gap, 0.0, self_gap == 0.0))
    rows.append(("hoelder_min_scaled", worst_hoelder, -1e-12, worst_hoelder >= -1e-12))
    if cfg.has_admissible():
        adm = cfg.admissible()
        if np.all(a >= adm.c1) and np.all(a <= adm.c2):
            gap = tv_lower_bound_gap(grid, a, adm)
            rows.append(("tv_lower_bound_gap", gap, -1e-12, gap >= -1e-12))
        else:
            rows.append(("a_in_[c1,c2]", 0.0, 0.0, False))
    return rows


def cmd_verify(args):
    cfg, prob = _load(args)
    a = _read_coefficient(args.a, prob.grid)
    ff = read_field(args.u, "node")
    if ff.grid != prob.grid:
        raise InvalidConfigError(f"{args.u}: grid does not match the configured problem")
    seed = cfg.seed
    rows = _verify_rows(cfg, prob, a, ff.values, args.samples, seed)
    width = max(len(r[0]) for r in rows)
    for name, value, threshold, ok in rows:
        print(f"{name:<{width}}  {value: .6e}  {threshold: .1e}  {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if all(r[3] for r in rows) else EXIT_VERIFY_FAILED


def _parse_kappas(text):
    try:
        vals = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise InvalidConfigError(f"cannot parse kappa list {text!r}") from None
    if not vals:
        raise InvalidConfigError("kappa list is empty")
    return vals


def cmd_sweep(args):
    kappas = _parse_kappas(args.kappas)
    cfg, prob = _load(args)
    adm = cfg.admissible()
    inv = cfg.inverse(prob.grid)
    rows = kappa_sweep(prob, inv, adm, kappas)
    with open(args.out, "w") as fh:
        fh.write("kappa,J,misfit,tv,a_digest,ok\n")
        for row in rows:
            fh.write(f"{row.kappa:.17g},{row.J:.17g},{row.misfit:.17g},{row.tv:.17g},{row.a_digest},{int(row.ok)}\n")
    return EXIT_OK if any(r.ok for r in rows) else EXIT_NOT_CONVERGED


def build_parser():
    parser = argparse.ArgumentParser(prog="qvident", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="flat key=value run configuration")
        p.add_argument("--seed", type=int, default=None, help="override solver.seed")

    p = sub.add_parser("synth", help="synthesize measurement data z from a_true")
    common(p)
    p.add_argument("--a-true", required=True, help="cell field file with the true coefficient")
    p.add_argument("--sigma", type=float, default=0.0, help="noise standard deviation per entry")
    p.add_argument("--out", required=True, help="output data file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("forward", help="solve the quasi-variational inequality for a given a")
    common(p)
    p.add_argument("--a", required=True, help="cell field file with the coefficient")
    p.add_argument("--out", required=True, help="output node field file")
    p.add_argument("--report", required=True, help="output key: value report")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("invert", help="identify a from data z")
    common(p)
    p.add_argument("--out", required=True, help="output cell field file")
    p.add_argument("--history", required=True, help="output history CSV")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("verify", help="audit a (a, u) pair against the solution hypotheses")
    common(p)
    p.add_argument("--a", required=True)
    p.add_argument("--u", required=True)
    p.add_argument("--samples", type=int, default=200)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="identify a for a list of regularization weights")
    common(p)
    p.add_argument("--kappas", required=True, help="comma-separated kappa values")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except QviError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
