import subprocess
import sys

import numpy as np
import pytest

from qvident import (
    AdmissibleSet,
    InverseConfig,
    expand_blocks,
    gradient,
    identify,
    make_grid,
    minty_check,
    solve_qvi,
)
from qvident.cli import main
from qvident.errors import InvalidConfigError
from qvident.inverse import digest
from qvident.io import format_report, load_config, parse_config, parse_report, read_field, synthesize, write_field

BASE = """\
# two-block instance
problem.dim = 1
problem.n = {n}
problem.p = 2
problem.phi = zero
problem.c_variant = affine_clamped
problem.c_alpha = 0.5
problem.c_beta = 0.25
problem.c_floor = 0.1
problem.c0 = 1
problem.m_const = {m}
admissible.c1 = 0.5
admissible.c2 = 3
admissible.c3 = 5
inverse.kappa = {kappa}
inverse.misfit_mode = gradient
inverse.block_size = {block}
inverse.z_file = z.txt
solver.seed = 7
"""


def _setup(tmp_path, n=64, m=1.0, kappa=1e-6, blocks=(1.0, 2.0), extra=""):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(BASE.format(n=n, m=m, kappa=kappa, block=n // len(blocks)) + extra)
    grid = make_grid(1, n)
    write_field(tmp_path / "a_true.txt", "cell", grid, expand_blocks(grid, blocks, n // len(blocks)))
    return cfg


def _run(*args):
    return main([str(a) for a in args])


# --- field files ------------------------------------------------------------


@pytest.mark.parametrize("kind,dim,n", [("node", 1, 9), ("cell", 1, 9), ("node", 2, 5), ("vector", 2, 5), ("vector", 1, 4)])
def test_field_roundtrip_bitwise(tmp_path, rng, kind, dim, n):
    g = make_grid(dim, n)
    shape = {"node": (g.interior_node_count,), "cell": (g.cell_count,), "vector": (g.cell_count, dim)}[kind]
    x = rng.normal(size=shape) * 10.0 ** rng.integers(-300, 300, size=shape)
    x.flat[0] = np.nextafter(1.0, 2.0)
    x.flat[-1] = 5e-324
    write_field(tmp_path / "f.txt", kind, g, x, {"note": "x"})
    ff = read_field(tmp_path / "f.txt", kind)
    assert ff.kind == kind and ff.grid == g
    assert ff.values.shape == shape
    assert ff.values.tobytes() == x.tobytes()
    assert ff.header["note"] == "x"


def test_field_errors(tmp_path):
    g = make_grid(1, 4)
    with pytest.raises(InvalidConfigError):
        write_field(tmp_path / "f.txt", "edge", g, np.zeros(3))
    with pytest.raises(ValueError):
        write_field(tmp_path / "f.txt", "node", g, np.zeros(4))
    with pytest.raises(InvalidConfigError):
        write_field(tmp_path / "f.txt", "node", g, np.array([0.0, np.nan, 1.0]))
    write_field(tmp_path / "f.txt", "node", g, np.zeros(3))
    with pytest.raises(InvalidConfigError):
        read_field(tmp_path / "f.txt", "cell")
    text = (tmp_path / "f.txt").read_text()
    (tmp_path / "g.txt").write_text(text + "3,1.0\n")
    with pytest.raises(InvalidConfigError):
        read_field(tmp_path / "g.txt")
    with pytest.raises(InvalidConfigError):
        read_field(tmp_path / "missing.txt")


# --- config -----------------------------------------------------------------


def test_config_parse_and_types(tmp_path):
    cfg = load_config(_setup(tmp_path))
    assert cfg["problem.n"] == 64 and isinstance(cfg["problem.n"], int)
    assert cfg["problem.p"] == 2.0 and isinstance(cfg["problem.p"], float)
    assert cfg.path("inverse.z_file") == str(tmp_path / "z.txt")
    prob = cfg.problem()
    assert prob.grid.n == 64 and prob.constraint.variant == "affine_clamped"
    assert cfg.admissible() == AdmissibleSet(0.5, 3.0, 5.0)


def test_config_rejects_unknown_key():
    with pytest.raises(InvalidConfigError, match="problem.nn"):
        parse_config("problem.nn = 4\n")


def test_config_rejects_duplicates_and_garbage():
    with pytest.raises(InvalidConfigError, match="problem.n"):
        parse_config("problem.n = 4\nproblem.n = 5\n")
    with pytest.raises(InvalidConfigError):
        parse_config("just words\n")
    with pytest.raises(InvalidConfigError, match="problem.n"):
        parse_config("problem.n = four\n")


def test_config_missing_key_named():
    cfg = parse_config("problem.dim = 1\n")
    with pytest.raises(InvalidConfigError, match="problem.n"):
        cfg.problem()
    cfg = parse_config(BASE.format(n=8, m=1, kappa=1, block=4).replace("problem.m_const = 1\n", ""))
    with pytest.raises(InvalidConfigError, match="m_const"):
        cfg.problem()


def test_report_roundtrip(tmp_path):
    cfg = load_config(_setup(tmp_path, n=16))
    prob = cfg.problem()
    u, rep = solve_qvi(prob, np.ones(16))
    parsed = parse_report(format_report(rep))
    assert parsed["converged"] == "true"
    assert int(parsed["outer_iterations"]) == rep.outer_iterations
    assert float(parsed["fp_residual"]) == rep.fp_residual
    assert "wall_time" not in parsed


# --- synth ------------------------------------------------------------------


def test_synthesize_noise_free_and_statistics(tmp_path):
    cfg = load_config(_setup(tmp_path))
    prob = cfg.problem()
    a = read_field(tmp_path / "a_true.txt").values
    z, clean, rep = synthesize(prob, a, "gradient", 0.0, 7)
    assert rep.converged
    assert z.tobytes() == clean.tobytes()
    z, clean, _ = synthesize(prob, a, "state", 0.01, 7)
    # sample std of 63 seeded draws; the window is over three standard errors wide
    assert 0.007 <= np.std(z - clean, ddof=1) <= 0.013
    z2, _, _ = synthesize(prob, a, "state", 0.01, 7)
    assert z.tobytes() == z2.tobytes()
    with pytest.raises(InvalidConfigError):
        synthesize(prob, a, "state", -1.0, 7)


def test_synth_noise_std_over_seeds(tmp_path):
    cfg = load_config(_setup(tmp_path))
    prob = cfg.problem()
    a = read_field(tmp_path / "a_true.txt").values
    stds = [np.std(np.subtract(*synthesize(prob, a, "gradient", 0.01, s)[:2]), ddof=1) for s in range(20)]
    assert all(0.007 <= s <= 0.013 for s in stds)


def test_cli_synth(tmp_path):
    cfg = _setup(tmp_path)
    assert _run("synth", "--config", cfg, "--a-true", tmp_path / "a_true.txt", "--out", tmp_path / "z.txt") == 0
    ff = read_field(tmp_path / "z.txt", "vector")
    assert ff.header["seed"] == "7" and float(ff.header["sigma"]) == 0.0
    u, _ = solve_qvi(load_config(cfg).problem(), read_field(tmp_path / "a_true.txt").values)
    assert ff.values.tobytes() == gradient(ff.grid, u).tobytes()
    args = ("synth", "--config", cfg, "--a-true", tmp_path / "a_true.txt", "--sigma", "0.01")
    assert _run(*args, "--out", tmp_path / "z1.txt") == 0
    assert _run(*args, "--out", tmp_path / "z2.txt") == 0
    assert _run(*args, "--out", tmp_path / "z3.txt", "--seed", "8") == 0
    assert (tmp_path / "z1.txt").read_bytes() == (tmp_path / "z2.txt").read_bytes()
    assert (tmp_path / "z1.txt").read_bytes() != (tmp_path / "z3.txt").read_bytes()


def test_cli_synth_invalid(tmp_path):
    cfg = _setup(tmp_path, blocks=(1.0, 4.0))
    assert _run("synth", "--config", cfg, "--a-true", tmp_path / "a_true.txt", "--out", tmp_path / "z.txt") == 3
    assert _run("synth", "--config", tmp_path / "nope.cfg", "--a-true", tmp_path / "a_true.txt", "--out", tmp_path / "z.txt") == 3


def test_cli_synth_nonconvergence(tmp_path):
    cfg = _setup(tmp_path, extra="solver.max_outer = 1\nsolver.tol_fp = 1e-15\n")
    assert _run("synth", "--config", cfg, "--a-true", tmp_path / "a_true.txt", "--out", tmp_path / "z.txt") == 2


# --- forward ------------------------------------------------------------------


def test_cli_forward_regression(tmp_path):
    cfg = _setup(tmp_path, blocks=(1.0,))
    rc = _run("forward", "--config", cfg, "--a", tmp_path / "a_true.txt", "--out", tmp_path / "u.txt",
              "--report", tmp_path / "rep.txt")
    assert rc == 0
    rep = parse_report((tmp_path / "rep.txt").read_text())
    assert rep["converged"] == "true"
    assert float(rep["fp_residual"]) <= 1e-6
    assert int(rep["outer_iterations"]) <= 50


def test_cli_forward_zero_source(tmp_path):
    cfg = _setup(tmp_path, m=0.0)
    assert _run("forward", "--config", cfg, "--a", tmp_path / "a_true.txt", "--out", tmp_path / "u.txt",
                "--report", tmp_path / "rep.txt") == 0
    assert np.all(read_field(tmp_path / "u.txt").values == 0.0)


def test_cli_forward_constant_constraint(tmp_path):
    cfg = _setup(tmp_path, m=5.0)
    text = cfg.read_text().replace("affine_clamped", "constant").replace("problem.c_beta = 0.25\n", "")
    text = text.replace("problem.c_floor = 0.1\n", "").replace("problem.c_alpha = 0.5", "problem.c_alpha = 0.3")
    cfg.write_text(text)
    assert _run("forward", "--config", cfg, "--a", tmp_path / "a_true.txt", "--out", tmp_path / "u.txt",
                "--report", tmp_path / "rep.txt") == 0
    assert int(parse_report((tmp_path / "rep.txt").read_text())["outer_iterations"]) <= 2


def test_cli_forward_nonconvergence_and_bad_input(tmp_path):
    cfg = _setup(tmp_path, extra="solver.max_outer = 1\nsolver.tol_fp = 1e-15\n")
    args = ("--out", tmp_path / "u.txt", "--report", tmp_path / "rep.txt")
    assert _run("forward", "--config", cfg, "--a", tmp_path / "a_true.txt", *args) == 2
    write_field(tmp_path / "a_bad.txt", "cell", make_grid(1, 32), np.ones(32))
    assert _run("forward", "--config", cfg, "--a", tmp_path / "a_bad.txt", *args) == 3
    write_field(tmp_path / "a_neg.txt", "cell", make_grid(1, 64), -np.ones(64))
    assert _run("forward", "--config", cfg, "--a", tmp_path / "a_neg.txt", *args) == 3
    assert _run("forward", "--config", cfg) == 3


# --- invert / verify / sweep --------------------------------------------------


def _synth(tmp_path, cfg, sigma=0.0):
    assert _run("synth", "--config", cfg, "--a-true", tmp_path / "a_true.txt", "--sigma", sigma,
                "--out", tmp_path / "z.txt") == 0


def test_cli_invert_two_block(tmp_path):
    cfg = _setup(tmp_path)
    _synth(tmp_path, cfg)
    assert _run("invert", "--config", cfg, "--out", tmp_path / "a.txt", "--history", tmp_path / "h.csv") == 0
    a = read_field(tmp_path / "a.txt", "cell").values
    a_true = read_field(tmp_path / "a_true.txt").values
    assert np.sum(np.abs(a - a_true)) / np.sum(a_true) <= 0.05
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "eval,J,misfit,tv,converged"
    assert len(lines) > 2


def test_cli_invert_start_at_optimum(tmp_path):
    cfg = _setup(tmp_path, kappa=0.0, blocks=(1.75,))
    _synth(tmp_path, cfg)
    assert _run("invert", "--config", cfg, "--out", tmp_path / "a.txt", "--history", tmp_path / "h.csv") == 0
    rows = (tmp_path / "h.csv").read_text().splitlines()[1:]
    assert len(rows) == 1
    assert abs(float(rows[-1].split(",")[1])) <= 1e-10


def test_cli_invert_missing_z_file(tmp_path, capsys):
    cfg = _setup(tmp_path)
    cfg.write_text(cfg.read_text().replace("inverse.z_file = z.txt\n", ""))
    assert _run("invert", "--config", cfg, "--out", tmp_path / "a.txt", "--history", tmp_path / "h.csv") == 3
    assert "inverse.z_file" in capsys.readouterr().err


def test_cli_invert_all_diverged(tmp_path):
    cfg = _setup(tmp_path)
    _synth(tmp_path, cfg)
    cfg.write_text(cfg.read_text() + "solver.max_outer = 1\nsolver.tol_fp = 1e-15\nsolver.max_evals = 3\n")
    assert _run("invert", "--config", cfg, "--out", tmp_path / "a.txt", "--history", tmp_path / "h.csv") == 2


def test_cli_verify(tmp_path, capsys):
    cfg = _setup(tmp_path)
    assert _run("forward", "--config", cfg, "--a", tmp_path / "a_true.txt", "--out", tmp_path / "u.txt",
                "--report", tmp_path / "rep.txt") == 0
    assert _run("verify", "--config", cfg, "--a", tmp_path / "a_true.txt", "--u", tmp_path / "u.txt") == 0
    out = capsys.readouterr().out
    assert "hoelder_self_gap" in out and " 0.000000e+00" in out
    assert "FAIL" not in out
    ff = read_field(tmp_path / "u.txt")
    bad = ff.values.copy()
    bad[20] += 0.1
    # the direct slack at the perturbation already exposes it
    prob = load_config(cfg).problem()
    assert minty_check(prob, read_field(tmp_path / "a_true.txt").values, bad, 1, 0).self_violation > 0
    write_field(tmp_path / "u_bad.txt", "node", ff.grid, bad)
    assert _run("verify", "--config", cfg, "--a", tmp_path / "a_true.txt", "--u", tmp_path / "u_bad.txt") == 1
    assert "FAIL" in capsys.readouterr().out
    assert _run("verify", "--config", cfg, "--a", tmp_path / "a_true.txt", "--u", tmp_path / "a_true.txt") == 3


def test_cli_sweep(tmp_path):
    cfg = _setup(tmp_path)
    _synth(tmp_path, cfg)
    assert _run("sweep", "--config", cfg, "--kappas", "1e-6,1e6", "--out", tmp_path / "s.csv") == 0
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "kappa,J,misfit,tv,a_digest,ok"
    tvs = [float(line.split(",")[3]) for line in lines[1:]]
    assert tvs[1] <= tvs[0] + 1e-9
    assert _run("sweep", "--config", cfg, "--kappas", "", "--out", tmp_path / "s.csv") == 3
    assert _run("sweep", "--config", cfg, "--kappas", "1,x", "--out", tmp_path / "s.csv") == 3


def test_cli_sweep_single_matches_invert(tmp_path):
    cfg = _setup(tmp_path, n=32)
    _synth(tmp_path, cfg, sigma=0.01)
    assert _run("invert", "--config", cfg, "--out", tmp_path / "a.txt", "--history", tmp_path / "h.csv") == 0
    assert _run("sweep", "--config", cfg, "--kappas", "1e-6", "--out", tmp_path / "s.csv") == 0
    (row,) = (tmp_path / "s.csv").read_text().splitlines()[1:]
    hist = (tmp_path / "h.csv").read_text().splitlines()[1:]
    a = read_field(tmp_path / "a.txt").values
    assert row.split(",")[4] == digest(a)
    final_J = min(float(h.split(",")[1]) for h in hist)
    assert float(row.split(",")[1]) == final_J
    # the library call agrees with both
    lc = load_config(cfg)
    prob = lc.problem()
    a_lib, _ = identify(prob, lc.inverse(prob.grid), lc.admissible())
    assert a_lib.tobytes() == a.tobytes()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "qvident", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "synth" in out.stdout
    out = subprocess.run([sys.executable, "-m", "qvident", "bogus"], capture_output=True, text=True)
    assert out.returncode == 3


def test_inverse_config_from_file_matches_manual(tmp_path):
    cfg_path = _setup(tmp_path, n=16)
    _synth(tmp_path, cfg_path)
    cfg = load_config(cfg_path)
    inv = cfg.inverse(cfg.grid())
    assert isinstance(inv, InverseConfig)
    assert inv.kappa == 1e-6 and inv.block_size == 8 and inv.z.shape == (16, 1)
