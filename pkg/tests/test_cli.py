import json
import subprocess
import sys

import numpy as np
import pytest

from gdpen.cli import main


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def lasso_files(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 5))
    theta = np.array([1.5, -1.0, 0.0, 0.0, 0.0])
    y = X @ theta + 0.05 * rng.standard_normal(60)
    np.savetxt(tmp_path / "X.csv", X, delimiter=",")
    np.savetxt(tmp_path / "y.csv", y, delimiter=",")
    _write(tmp_path / "pen.json", {"kind": "lasso", "p": 5, "active": [0, 1]})
    return tmp_path


def test_certify_exit_codes(tmp_path, capsys):
    np.savetxt(tmp_path / "Q.csv", [[1.0, 0.5], [0.5, 1.0]], delimiter=",")
    np.savetxt(tmp_path / "Qbad.csv", [[1.0, 1.25], [1.25, 2.0]], delimiter=",")
    pen = _write(tmp_path / "pen.json", {"kind": "lasso", "p": 2, "active": [0]})
    assert main(["certify", "--Q", str(tmp_path / "Q.csv"), "--penalty", pen,
                 "--out", str(tmp_path / "c.json")]) == 0
    assert json.loads((tmp_path / "c.json").read_text())["tau"] == pytest.approx(0.5)
    assert main(["certify", "--Q", str(tmp_path / "Qbad.csv"), "--penalty", pen]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_certify_indeterminate(tmp_path, monkeypatch):
    c = sys.modules["gdpen.certify"]
    np.savetxt(tmp_path / "Q.csv", np.eye(2), delimiter=",")
    pen = _write(tmp_path / "pen.json", {"kind": "lasso", "p": 2, "active": [0]})

    def fake(*a, **k):
        return c.IrrepResult(0.9, 1.1, float("nan"), "indeterminate", "ascent+bound", False)

    monkeypatch.setattr(c, "irrep_check", fake)
    assert main(["certify", "--Q", str(tmp_path / "Q.csv"), "--penalty", pen]) == 3


def test_certify_matrix_market(tmp_path):
    from gdpen.io import save_matrix

    save_matrix(tmp_path / "Q.mtx", [[1.0, 0.5], [0.5, 1.0]], symmetric=True)
    pen = _write(tmp_path / "pen.json", {"kind": "lasso", "p": 2, "active": [0]})
    assert main(["certify", "--Q", str(tmp_path / "Q.mtx"), "--penalty", pen]) == 0


def test_fit_and_witness(lasso_files):
    d = lasso_files
    assert main(["fit", "--X", str(d / "X.csv"), "--y", str(d / "y.csv"), "--penalty",
                 str(d / "pen.json"), "--lambda", "0.05", "--out", str(d / "fit")]) == 0
    fit = json.loads((d / "fit" / "fit.json").read_text())
    assert fit["support"] == [0, 1] and fit["converged"]
    assert np.loadtxt(d / "fit" / "theta_hat.csv", delimiter=",").shape == (5,)
    assert main(["fit", "--X", str(d / "X.csv"), "--y", str(d / "y.csv"), "--penalty",
                 str(d / "pen.json"), "--lambda-grid", "0.01,0.1,1", "--out", str(d / "path")]) == 0
    assert np.loadtxt(d / "path" / "theta_hat.csv", delimiter=",").shape == (5, 3)
    assert main(["witness", "--X", str(d / "X.csv"), "--y", str(d / "y.csv"), "--penalty",
                 str(d / "pen.json"), "--lambda", "0.05", "--out", str(d / "w.json")]) == 0
    w = json.loads((d / "w.json").read_text())
    assert w["certified_unique"] and w["gauge_I_of_u_I"] < 1


def test_phase_seed_and_plot(tmp_path):
    cfg = _write(tmp_path / "cfg.json", {"family": "lasso", "sizes": [8], "n_grid": [20, 40],
                                         "trials": 3})
    assert main(["phase", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "5",
                 "--workers", "1"]) == 0
    d = json.loads((tmp_path / "a" / "result.json").read_text())
    assert d["master_seed"] == 5
    assert main(["plot", "--in", str(tmp_path / "a" / "result.json"), "--out",
                 str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").read_bytes() == (tmp_path / "a" / "result.svg").read_bytes()


def test_converse_command(tmp_path, capsys):
    np.savetxt(tmp_path / "Q.csv", [[1.0, 1.25], [1.25, 2.0]], delimiter=",")
    np.savetxt(tmp_path / "t.csv", [1.0, 0.0], delimiter=",")
    pen = _write(tmp_path / "pen.json", {"kind": "lasso", "p": 2, "active": [0]})
    assert main(["converse", "--Q", str(tmp_path / "Q.csv"), "--penalty", pen, "--theta-star",
                 str(tmp_path / "t.csv"), "--trials", "10", "--workers", "1"]) == 0
    assert "violation 1.25" in capsys.readouterr().out


def test_console_script_runs():
    out = subprocess.run([sys.executable, "-m", "gdpen.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("phase", "certify", "fit", "witness", "plot"):
        assert cmd in out.stdout
