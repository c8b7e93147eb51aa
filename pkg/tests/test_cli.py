import math

import numpy as np
import pytest

from flmor import cli
from flmor.evaluation import ErrorReport
from flmor.systems import ReducedModel, load_system, save_system
from flmor.tsia import TsiaReport
from conftest import scalar_reduced, scalar_system

GEN = "random:n=30,p=2,m=2,density=0.15,seed=4"


def _reduce(out, *extra):
    return cli.main(["reduce", "--generator", GEN, "--r", "3", "--n-inside", "10", "--n-outside", "10",
                     "--out", str(out), *extra])


def test_reduce_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    assert _reduce(out, "--band", "0.5,3") == cli.EXIT_OK
    for name in ("config.txt", "reduced/manifest.txt", "V.mtx", "W.mtx", "tsia_report.txt",
                 "error_report.txt", "sigma.csv", "timings.txt"):
        assert (out / name).exists(), name
    rep = ErrorReport.from_text((out / "error_report.txt").read_text())
    assert rep.band == "0.5,3.0" and rep.r == 3 and rep.xi_omega_unlimited_model is not None
    assert TsiaReport.from_text((out / "tsia_report.txt").read_text()).band == "0.5,3.0"
    assert "xi =" in capsys.readouterr().out


def test_reduce_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _reduce(a) == _reduce(b) == cli.EXIT_OK
    for name in ("reduced/A.mtx", "V.mtx", "W.mtx", "tsia_report.txt", "error_report.txt", "sigma.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_zero_iterations(tmp_path):
    out = tmp_path / "z"
    assert _reduce(out, "--max-iter", "0") == cli.EXIT_OK
    assert TsiaReport.from_text((out / "tsia_report.txt").read_text()).iterations == 0


def test_config_file_and_set_precedence(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(f"model.generator = {GEN}\nreduce.r = 5\nreduce.max_iter = 3\n")
    out = tmp_path / "c"
    code = cli.main(["reduce", "--config", str(cfgfile), "--set", "reduce.r=4", "--r", "2",
                     "--n-inside", "5", "--n-outside", "5", "--out", str(out)])
    assert code == cli.EXIT_OK
    text = (out / "config.txt").read_text()
    assert "reduce.r = 2\n" in text and "reduce.max_iter = 3\n" in text


def test_evaluate_scalar(tmp_path, capsys):
    full = save_system(scalar_system(), tmp_path / "full")
    red = save_system(scalar_reduced().as_system(), tmp_path / "red")
    code = cli.main(["evaluate", "--manifest", str(full), "--reduced", str(red), "--eval-band", "0,1",
                     "--n-inside", "5", "--n-outside", "5", "--out", str(tmp_path / "ev")])
    assert code == cli.EXIT_OK
    rep = ErrorReport.from_text((tmp_path / "ev" / "error_report.txt").read_text())
    assert abs(rep.xi - math.sqrt(1 / 12)) < 1e-12
    assert "xi = 2.886751e-01" in capsys.readouterr().out


def test_as_reduced_applies_e():
    sysr = scalar_system(a=-4.0, b=2.0, e=2.0)
    red = cli.as_reduced(sysr)
    assert red.a_hat[0, 0] == -2.0 and red.b_hat[0, 0] == 1.0


def test_evaluate_missing_file(tmp_path, capsys):
    full = save_system(scalar_system(), tmp_path / "full")
    code = cli.main(["evaluate", "--manifest", str(full), "--reduced", str(tmp_path / "nope.txt")])
    assert code == cli.EXIT_INPUT
    assert "input error" in capsys.readouterr().err


def test_evaluate_dimension_mismatch(tmp_path):
    red = save_system(ReducedModel(-np.eye(2), np.ones((2, 2)), np.ones((1, 2))).as_system(), tmp_path / "red")
    code = cli.main(["evaluate", "--generator", "random:n=10,p=1,m=1", "--reduced", str(red),
                     "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_INPUT


def test_numerical_failure_exit_code(tmp_path, capsys):
    full = save_system(scalar_system(), tmp_path / "full")
    # D̂ != D makes the H2 error infinite
    mismatched = ReducedModel(np.array([[-2.0]]), np.array([[1.0]]), np.array([[1.0]]), np.array([[0.5]]))
    red = save_system(mismatched.as_system(), tmp_path / "red")
    code = cli.main(["evaluate", "--manifest", str(full), "--reduced", str(red), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_bad_flag_value_is_input_error(tmp_path):
    assert cli.main(["reduce", "--generator", GEN, "--r", "many", "--out", str(tmp_path)]) == cli.EXIT_INPUT


def test_order_too_large_is_input_error(tmp_path):
    assert cli.main(["reduce", "--generator", "random:n=5", "--r", "5", "--out", str(tmp_path)]) == cli.EXIT_INPUT


def test_verify_quick_passes(capsys):
    assert cli.main(["verify"]) == cli.EXIT_OK
    assert "checks passed" in capsys.readouterr().out


def test_verify_flipped_sign_fails(capsys):
    assert cli.main(["verify", "--flip-cross-sign"]) == cli.EXIT_VERIFY
    assert "FAIL" in capsys.readouterr().out


def test_benchmark_single_size(tmp_path):
    assert cli.main(["benchmark", "--sizes", "40", "--r", "3", "--repeats", "1", "--out", str(tmp_path)]) == 0
    rows = [l for l in (tmp_path / "benchmark.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 2


def test_benchmark_bad_sizes():
    with pytest.raises(SystemExit):
        cli.main(["benchmark", "--sizes", "ten"])


def test_reduced_model_reloads(tmp_path):
    out = tmp_path / "r"
    _reduce(out)
    red = cli.as_reduced(load_system(out / "reduced" / "manifest.txt"))
    assert red.r == 3 and red.stable
