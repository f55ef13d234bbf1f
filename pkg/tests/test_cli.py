import json

import pytest

from projsde.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_convergence_smoke(tmp_path, capsys):
    out_file = tmp_path / "kubo.csv"
    code, out, _ = run(capsys, "convergence", "--model", "kubo", "--methods", "euler,eulerP,t2",
                       "--seed", "42", "--paths", "20", "--h-ref", "2^-10", "--out", str(out_file))
    assert code == 0
    text = out_file.read_text()
    assert text.startswith("method,h,mse_error\n")
    assert text.count("# order,") == 3
    assert "EulerP" in out  # summary table


def test_convergence_to_stdout_json(capsys):
    code, out, _ = run(capsys, "convergence", "--methods", "t2", "--paths", "5",
                       "--h-levels", "2^-3,2^-4,2^-5", "--h-ref", "2^-6", "--format", "json")
    assert code == 0
    assert json.loads(out)["methods"] == ["T2"]


def test_unknown_model_names_valid_models(capsys):
    code, _, err = run(capsys, "convergence", "--model", "nosuch")
    assert code == 1
    assert "kubo" in err and "pendulum" in err and "lotka" in err


@pytest.mark.parametrize("argv", [
    ["convergence", "--bogus"],
    ["frobnicate"],
    [],
    ["drift", "--params", "a"],
    ["convergence", "--h-levels", "x,y"],
    ["convergence", "--paths", "0"],
    ["drift", "--method", "rk4"],
    ["drift", "--model", "kubo", "--params", "omega=2"],
])
def test_configuration_errors_exit_one(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_numerical_failure_exits_two(capsys):
    code, _, err = run(capsys, "convergence", "--methods", "eulerP", "--paths", "3",
                       "--h-levels", "2^-3,2^-4,2^-5", "--h-ref", "2^-6",
                       "--newton-max-iter", "1", "--newton-tol", "1e-15")
    assert code == 2 and "EulerP" in err


def test_drift_and_path(tmp_path, capsys):
    code, out, _ = run(capsys, "drift", "--model", "pendulum", "--method", "midP",
                       "--t-end", "1", "--out", str(tmp_path / "p.csv"))
    assert code == 0 and "max combined invariant error" in out
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "step,t,x_1,x_2,inv_err_1,combined_err"
    assert len(lines) == 102
    code, out, _ = run(capsys, "path", "--model", "kubo", "--method", "euler", "--t-end", "0.1",
                       "--h", "0.02", "--x0", "0.5,0.5", "--no-truncation")
    assert code == 0 and out.splitlines()[1].startswith("0,0.00000e+00,5.00000e-01,5.00000e-01")


def test_list_models(capsys):
    code, out, _ = run(capsys, "list-models")
    assert code == 0 and [ln.split()[0] for ln in out.splitlines()] == ["kubo", "pendulum", "lotka"]


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    assert out.count("PASS") == 15 and "FAIL" not in out
