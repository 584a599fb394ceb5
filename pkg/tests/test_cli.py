from __future__ import annotations

import io
import json
import math

import numpy as np
import pytest

from peanoivp import corpus
from peanoivp.cli import EXIT_NEGATIVE, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, run
from peanoivp.gridfn import Grid, GridFunction, constant


def _run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def _files(tmp_path, *argv):
    traj, rep = tmp_path / "traj.csv", tmp_path / "report.json"
    code, _, err = _run(*argv, "--out", str(traj), "--report", str(rep))
    report = json.loads(rep.read_text()) if rep.exists() else None
    return code, traj, report, err


def test_solve_peano(tmp_path):
    code, traj, report, _ = _files(tmp_path, "solve", "--problem", "peano_cubed", "--method", "tonelli",
                                   "--k", "16", "--grid", "1600")
    assert code == EXIT_OK
    assert report["bound_Lc_over_k"] == pytest.approx(0.0625)
    assert report["residual"] <= 0.0625 + report["quadrature_slack"]
    assert report["label"] == "peano_cubed" and report["k"] == 16 and report["m"] == 1600
    assert GridFunction.from_csv(traj).m == 1600


def _greatest_256(tmp_path):
    return _files(tmp_path, "extremal", "--problem", "peano_cubed", "--side", "greatest",
                  "--kmax", "256", "--grid", "4096", "--tol", "1e-3")


def test_extremal_greatest_reports_honestly(tmp_path):
    code, _, report, _ = _greatest_256(tmp_path)
    assert code == EXIT_OK
    assert report["converged"] is False and report["k_final"] == 256
    assert report["monotonicity_violation"] == 0.0


@pytest.mark.xfail(strict=True, reason="rung k=256 is 0.0207 from t^3; kmax=4096 meets 2e-2")
def test_extremal_greatest_within_2e_2(tmp_path):
    _, traj, _, _ = _greatest_256(tmp_path)
    g = GridFunction.from_csv(traj)
    assert np.max(np.abs(g.component(0) - g.times**3)) <= 2e-2


def test_extremal_longer_schedule_within_2e_2(tmp_path):
    code, traj, report, _ = _files(tmp_path, "extremal", "--problem", "peano_cubed", "--side", "greatest",
                                   "--kmax", "4096", "--grid", "4096")
    g = GridFunction.from_csv(traj)
    assert code == EXIT_OK and np.max(np.abs(g.component(0) - g.times**3)) <= 2e-2


def test_verify_zero_lower_for_blowup(tmp_path):
    zero = tmp_path / "zero.csv"
    constant(0.0, Grid(0.0, 0.5, 100)).to_csv(zero)
    code, out, _ = _run("verify", "--problem", "blowup_tan", "--candidate", str(zero), "--kind", "lower")
    assert code == EXIT_OK and json.loads(out)["verdict"] is True
    code, _, _ = _run("verify", "--problem", "blowup_tan", "--candidate", str(zero), "--kind", "upper")
    assert code == EXIT_NEGATIVE


def test_residual_subcommand(tmp_path):
    traj = tmp_path / "cubic.csv"
    corpus.peano_family(0.0, 1000).to_csv(traj)
    code, out, _ = _run("residual", "--problem", "peano_cubed", "--trajectory", str(traj), "--tol", "1e-4")
    assert code == EXIT_OK and json.loads(out)["is_solution"] is True
    zero = tmp_path / "zero.csv"
    constant(0.0, Grid(0.0, 1.0, 100)).to_csv(zero)
    code, _, _ = _run("residual", "--problem", "linear_unit", "--trajectory", str(zero), "--tol", "1e-3")
    assert code == EXIT_NEGATIVE
    code, _, err = _run("residual", "--problem", "linear_unit", "--trajectory", str(zero), "--tol", "1e-30")
    assert code == EXIT_USAGE and "[residual]" in err


def test_bracket_subcommand(tmp_path):
    lower, upper = tmp_path / "lo.csv", tmp_path / "hi.csv"
    grid = Grid(0.0, 1 / 3, 2048)
    constant(0.0, grid).to_csv(lower)
    GridFunction.sample(lambda t: 3.0 * t, grid).to_csv(upper)
    code, traj, report, _ = _files(tmp_path, "bracket", "--problem", "peano_cubed", "--lower", str(lower),
                                   "--upper", str(upper), "--eps", "0.1")
    assert code == EXIT_OK and report["holds"] and report["residual"] < 0.1


def test_quasimono_subcommand():
    code, out, _ = _run("quasimono", "--problem", "uncoupled_system")
    assert code == EXIT_NEGATIVE
    assert json.loads(out)["witness"]["component"] == 2
    code, _, _ = _run("quasimono", "--problem", "peano_cubed")
    assert code == EXIT_OK


def test_corpus_subcommand():
    code, out, _ = _run("corpus", "--list")
    assert code == EXIT_OK and len(out.splitlines()) == len(corpus.names())
    code, out, _ = _run("corpus", "--dump", "linear_unit")
    assert json.loads(out)["b"] == "inf"


def test_usage_errors(tmp_path):
    assert _run("solve", "--problem", "nope")[0] == EXIT_USAGE
    assert _run("solve", "--problem", "peano_cubed", "--k", "16", "--grid", "1601")[0] == EXIT_USAGE
    assert _run("solve")[0] == EXIT_USAGE
    assert _run("bogus")[0] == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text('{"t0": 0, "y0": [0], "a": 1, "b": 1, "rhs": ["y1^(2/3)"]}')
    code, _, err = _run("solve", "--problem", str(bad))
    assert code == EXIT_USAGE and "[rhs_lang]" in err and "column" in err


def test_numerical_failure_names_module_and_time(tmp_path):
    path = tmp_path / "tan_pi.json"
    path.write_text(json.dumps({"label": "tan_pi", "t0": 0, "y0": [0], "a": math.pi, "b": "inf", "L": 100.0,
                                "rhs": ["1 + y1^2"]}))
    code, _, err = _run("solve", "--problem", str(path), "--k", "1024", "--grid", "2048",
                        "--out", str(tmp_path / "x.csv"))
    assert code == EXIT_NUMERICAL
    assert "[integrators]" in err and "t=" in err


def test_L_override_changes_interval(tmp_path):
    code, _, report, _ = _files(tmp_path, "solve", "--problem", "peano_cubed", "--L", "4", "--k", "2")
    assert code == EXIT_OK and report["problem"]["c"] == pytest.approx(0.25)


@pytest.mark.parametrize("argv", [
    ("solve", "--problem", "blowup_tan", "--k", "8", "--verbose"),
    ("quasimono", "--problem", "uncoupled_system", "--seed", "7", "--samples", "300"),
    ("extremal", "--problem", "peano_cubed", "--side", "least", "--kmax", "32", "--grid", "512"),
])
def test_deterministic_output(argv):
    first = _run(*argv)
    assert first == _run(*argv)
    assert first[0] in (EXIT_OK, EXIT_NEGATIVE)
