import csv
import hashlib
import json

import numpy as np
import pytest

from gdpen.certify import certify
from gdpen.experiments import PhaseConfig, PhaseResult
from gdpen.penalties import lasso
from gdpen.report import PHASE_COLUMNS, emit_report, phase_svg


def _fake_phase(sizes=(16, 25), ns=(100, 200, 300)):
    rows = []
    for s in sizes:
        for k, n in enumerate(ns):
            rows.append({"size": s, "n": n, "rescaled_n": n / np.log(s), "trials": 10,
                         "successes": 3 * k, "success_fraction": 0.3 * k, "mean_l2_error": 1.0 / n,
                         "nonconverged": 0, "lambda": 0.1})
    cfg = PhaseConfig(sizes=list(sizes), n_grid=list(ns)).to_dict()
    return PhaseResult(cfg, rows, {})


def test_row_count_and_header(tmp_path):
    emit_report(_fake_phase(), tmp_path, formats=("csv",))
    with open(tmp_path / "result.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == PHASE_COLUMNS
    assert len(rows) == 7


def test_empty_result_is_header_only(tmp_path):
    emit_report(PhaseResult(PhaseConfig().to_dict(), [], {}), tmp_path, formats=("csv", "svg"))
    assert (tmp_path / "result.csv").read_text() == ",".join(PHASE_COLUMNS) + "\n"


def test_svg_bytes_are_stable(tmp_path):
    a = hashlib.sha256(phase_svg(_fake_phase().to_dict()).encode()).hexdigest()
    b = hashlib.sha256(phase_svg(_fake_phase().to_dict()).encode()).hexdigest()
    assert a == b
    assert "<svg" in phase_svg(_fake_phase().to_dict())


def test_json_keeps_config_and_seed(tmp_path):
    emit_report(_fake_phase(), tmp_path, formats=("json",))
    d = json.loads((tmp_path / "result.json").read_text())
    assert d["master_seed"] == 0 and d["config"]["sizes"] == [16, 25]


def test_certificate_report_formats(tmp_path):
    rep = certify(lasso(2, [0]), np.array([[1.0, 0.5], [0.5, 1.0]]))
    emit_report(rep, tmp_path, formats=("json", "csv"), stem="cert")
    d = json.loads((tmp_path / "cert.json").read_text())
    assert d["verdicts"]["irrepresentable"] == "pass"
    assert d["lambda_window"][1] == "inf"
    assert "tau," in (tmp_path / "cert.csv").read_text()
    with pytest.raises(ValueError):
        emit_report(rep, tmp_path, formats=("svg",))


def test_unwritable_path_names_the_path(tmp_path):
    target = tmp_path / "file"
    target.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_report(_fake_phase(), target / "sub", formats=("csv",))
