import json
import subprocess
import sys

import numpy as np
import pytest

from rhk.cli import main
from rhk.monodromy import monodromy_from_parameters

from conftest import PROBLEMS


def run(tmp_path, command, spec, *extra):
    out = tmp_path / f"{command}.json"
    code = main([command, "--spec", str(spec), "--out", str(out), *extra])
    return code, json.loads(out.read_text())


def test_solve_genus1(tmp_path):
    code, rep = run(tmp_path, "solve", PROBLEMS / "genus1.json")
    assert code == 0 and rep["pass"] and rep["status"] == 0
    names = {c["name"] for c in rep["checks"]}
    assert {"normalization", "det_closed_form", "monodromy_closed_form", "monodromy_product"} <= names
    assert rep["problem"]["genus"] == 1 and rep["config"]["tol_det"] == 1e-9


def test_covering_info_needs_no_parameters(tmp_path):
    spec = json.loads((PROBLEMS / "genus2.json").read_text())
    del spec["parameters"]
    path = tmp_path / "bare.json"
    path.write_text(json.dumps(spec))
    code, rep = run(tmp_path, "covering-info", path)
    assert code == 0
    assert rep["result"]["genus"] == 2 and len(rep["result"]["period_matrix"]) == 2


def test_tau_and_residues(tmp_path):
    code, rep = run(tmp_path, "tau", PROBLEMS / "genus0.json")
    assert code == 0, rep
    code, rep = run(tmp_path, "residues", PROBLEMS / "genus1.json")
    assert code == 0, rep


def test_report_is_deterministic(tmp_path):
    _, a = run(tmp_path, "covering-info", PROBLEMS / "genus1.json")
    _, b = run(tmp_path, "covering-info", PROBLEMS / "genus1.json")
    a.pop("generated"), b.pop("generated")
    assert a == b


def test_representation_form(tmp_path, g1):
    S = g1.S
    rep = monodromy_from_parameters(g1.params, S.index_tables(), S)
    spec = json.loads((PROBLEMS / "genus1.json").read_text())
    del spec["parameters"]
    spec["representation"] = rep.to_json()
    path = tmp_path / "rep.json"
    path.write_text(json.dumps(spec))
    code, out = run(tmp_path, "solve", path)
    assert code == 0
    assert any(c["name"] == "input_representation" and c["pass"] for c in out["checks"])


def test_spec_errors_name_the_field(tmp_path):
    spec = json.loads((PROBLEMS / "genus1.json").read_text())
    spec["parameters"]["r"][0] = "abc"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    code, rep = run(tmp_path, "solve", path)
    assert code == 2 and rep["error"]["field"] == "parameters.r[0]"


def test_json_syntax_error_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "schema": "rhk/1",\n  "surface": \n}\n')
    code, rep = run(tmp_path, "solve", path)
    assert code == 2 and "line 4" in rep["error"]["message"]


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"tol_nonsense": 1}))
    code, rep = run(tmp_path, "solve", PROBLEMS / "genus1.json", "--config", str(cfg))
    assert code == 2 and rep["error"]["field"] == "config.tol_nonsense"


def test_failed_check_exit_code(tmp_path):
    code, rep = run(tmp_path, "solve", PROBLEMS / "genus1.json", "--tol", "1e-300")
    assert code == 1 and not rep["pass"]


def test_malgrange_crossing_exit_code(tmp_path):
    code, rep = run(tmp_path, "solve", PROBLEMS / "malgrange_crossing.json")
    assert code == 3 and rep["malgrange"]["flag"]


@pytest.mark.slow
def test_console_script_verify(tmp_path):
    out = tmp_path / "verify.json"
    proc = subprocess.run([sys.executable, "-m", "rhk.cli", "verify", "--spec", str(PROBLEMS / "genus1.json"),
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rep = json.loads(out.read_text())
    assert rep["pass"] and all(np.isfinite(c["residual"]) for c in rep["checks"] if c["residual"] is not None)
