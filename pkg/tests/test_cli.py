import json
import subprocess
import sys

import numpy as np
import pytest

from causalvar.cli import run
from causalvar.panel import write_panel
from causalvar.simgen import generate

from conftest import WORKED_OMEGA

NAMES = ["y1", "y2", "y3", "y4", "y5", "y6"]
WORKED_STRUCTURE = {
    "classes": [["y1", "y2"], ["y3", "y4"]],
    "transient": ["y5", "y6"],
    "edges": [{"from": ["y1", "y2"], "to": ["y5", "y6"]}, {"from": ["y3", "y4"], "to": ["y5", "y6"]}],
}


@pytest.fixture(scope="module")
def panel_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "panel.csv"
    panel, _ = generate("circular", 150, 3)
    write_panel(panel, path)
    return path


@pytest.fixture()
def omega_csv(tmp_path):
    path = tmp_path / "omega.csv"
    rows = [",".join(NAMES)] + [",".join(repr(float(x)) for x in row) for row in WORKED_OMEGA]
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture()
def structure_json(tmp_path):
    path = tmp_path / "structure.json"
    path.write_text(json.dumps(WORKED_STRUCTURE))
    return path


def invoke(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_decompose_rows_sum_to_one(capsys, panel_csv):
    code, out, _ = invoke(capsys, "decompose", panel_csv, "--lags", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == 1 and doc["command"] == "decompose"
    om = np.array(doc["result"]["omega"])
    np.testing.assert_allclose(om.sum(axis=1), 1.0, atol=1e-12)


def test_decompose_csv_and_markdown(capsys, panel_csv):
    code, out, _ = invoke(capsys, "decompose", panel_csv, "--lags", "1", "--format", "csv")
    assert code == 0 and out.startswith("schema_version,1\n")
    code, out, _ = invoke(capsys, "decompose", panel_csv, "--lags", "1", "--format", "md")
    assert code == 0 and "| variable |" in out


def test_zero_horizon_is_a_usage_error(capsys, panel_csv):
    code, _, err = invoke(capsys, "decompose", panel_csv, "--horizon", "0")
    assert code == 1 and "horizon" in err


def test_missing_column_is_a_data_error(capsys, panel_csv):
    code, _, err = invoke(capsys, "decompose", panel_csv, "--columns", "y1,zz")
    assert code == 2 and "zz" in err


def test_zero_datasets_is_a_usage_error(capsys):
    code, _, _ = invoke(capsys, "simulate", "--template", "circular", "--datasets", "0")
    assert code == 1


def test_quick_conflicts_with_datasets(capsys):
    code, _, err = invoke(capsys, "simulate", "--quick", "--datasets", "3")
    assert code == 1 and "--quick" in err


def test_pi_and_quota_from_omega(capsys, omega_csv, structure_json):
    code, out, _ = invoke(capsys, "pi", omega_csv, "--omega", "--structure", structure_json, "--quota", "0.4,0.6")
    assert code == 0
    pi = json.loads(out)["result"]["pi"]
    np.testing.assert_allclose(pi, [1 / 5, 1 / 5, 12 / 95, 9 / 19, 0, 0], atol=1e-12)


def test_quota_needs_structure(capsys, omega_csv):
    code, _, _ = invoke(capsys, "pi", omega_csv, "--omega", "--quota", "0.4,0.6")
    assert code == 1


def test_local_distribution_from_omega(capsys, omega_csv, structure_json):
    code, out, _ = invoke(capsys, "local", omega_csv, "--omega", "--structure", structure_json, "--target", "y5")
    assert code == 0
    text = json.dumps(json.loads(out)["result"])
    assert "y5" in text


def test_misclassified_structure_exits_with_data_code(capsys, omega_csv, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"classes": [["y3", "y4", "y5", "y6"]], "transient": ["y1", "y2"], "edges": []}))
    code, _, _ = invoke(capsys, "local", omega_csv, "--omega", "--structure", bad)
    assert code == 2


def test_config_file_and_flag_precedence(capsys, panel_csv, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nlags=1\nhorizon=5\n")
    code, out, _ = invoke(capsys, "decompose", panel_csv, "--config", cfg)
    assert code == 0
    assert json.loads(out)["config"]["horizon"] == 5
    code, out, _ = invoke(capsys, "decompose", panel_csv, "--config", cfg, "--horizon", "7")
    assert json.loads(out)["config"]["horizon"] == 7


def test_identify_writes_same_bytes_twice(tmp_path, panel_csv, capsys):
    args = ["identify", panel_csv, "--lags", "1", "--replicates", "100", "--seed", "9", "--verify"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run([str(x) for x in args + ["--output", a]]) == 0
    assert run([str(x) for x in args + ["--output", b]]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["config"]["seed"] == 9
    assert set(doc["result"]["structure"]["transient"]) <= {f"y{i}" for i in range(1, 10)}


def test_module_entry_point(panel_csv):
    res = subprocess.run(
        [sys.executable, "-m", "causalvar", "decompose", str(panel_csv), "--lags", "1", "--format", "csv"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "schema_version,1"
