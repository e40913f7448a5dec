import csv
import json
import subprocess
import sys

import pytest

from coopvlp.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main
from coopvlp.geometry import DATA_DIR
from coopvlp.harness import bundled_plan_path

SCENARIO = DATA_DIR / "scenario_paper_sec6.json"


def tiny_plan(tmp_path, **over):
    d = {
        "scenario_path": str(DATA_DIR / "scenario_paper_sec6_2d.json"),
        "sweep": {"variable": "anchor_power", "values": [1.0]},
        "monte_carlo_runs": 1,
        "algorithms": [{"name": "CRLB"}, {"name": "CSGP"}],
        "seed": 3,
        "solver": {"max_iters": 50},
    }
    d.update(over)
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(d))
    return p


def test_validate_ok(capsys):
    assert main(["validate", "--scenario", str(SCENARIO)]) == EXIT_OK
    assert "valid" in capsys.readouterr().out
    assert main(["validate", "--plan", str(bundled_plan_path())]) == EXIT_OK


def test_validate_invalid(tmp_path, capsys):
    d = json.loads(SCENARIO.read_text())
    d["anchors"][0]["orientation"] = [0, 0, 0]
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    assert main(["validate", "--scenario", str(p)]) == EXIT_INVALID
    assert "anchors[0].orientation is the zero vector" in capsys.readouterr().out


def test_validate_needs_one_input(capsys):
    assert main(["validate"]) == EXIT_INVALID
    assert main(["validate", "--scenario", str(SCENARIO), "--plan", "x"]) == EXIT_INVALID


def test_crlb(tmp_path, capsys):
    assert main(["crlb", "--scenario", str(SCENARIO), "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "crlb_sweep.csv")))
    assert len(rows) == 20
    assert list(rows[0])[:4] == ["mode", "power", "total_m2", "per_unit_1_m2"]


def test_crlb_missing_scenario(tmp_path):
    assert main(["crlb", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_INVALID


def test_run_and_seed_override(tmp_path, capsys):
    plan = tiny_plan(tmp_path)
    assert main(["run", "--plan", str(plan), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["run", "--plan", str(plan), "--seed", "4", "--out", str(tmp_path / "b")]) == EXIT_OK
    man = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert man["seeds"]["master"] == 4
    assert (tmp_path / "a" / "errors.csv").read_bytes() != (tmp_path / "b" / "errors.csv").read_bytes()


def test_residuals_verb(tmp_path):
    plan = tiny_plan(tmp_path)
    assert main(["residuals", "--plan", str(plan), "--out", str(tmp_path / "r"), "--threads", "1"]) == EXIT_OK
    assert sorted(p.name for p in (tmp_path / "r").iterdir()) == ["manifest.json", "residuals_p1.csv"]


def test_bad_plan_is_invalid_input(tmp_path, capsys):
    plan = tiny_plan(tmp_path, monte_carlo_runs=0)
    assert main(["run", "--plan", str(plan), "--out", str(tmp_path)]) == EXIT_INVALID
    assert "monte_carlo_runs" in capsys.readouterr().err
    assert main(["run", "--plan", str(tmp_path / "missing.json")]) == EXIT_INVALID
    assert main(["run", "--plan", str(tiny_plan(tmp_path)), "--threads", "0"]) == EXIT_INVALID


def test_runtime_failure(tmp_path, capsys):
    target = tmp_path / "file"
    target.write_text("")
    assert main(["run", "--plan", str(tiny_plan(tmp_path)), "--out", str(target)]) == EXIT_RUNTIME
    assert "runtime error" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "coopvlp", "validate", "--scenario", str(SCENARIO)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "valid" in r.stdout
    r = subprocess.run([sys.executable, "-m", "coopvlp", "frobnicate"], capture_output=True, text=True)
    assert r.returncode == EXIT_INVALID


def test_usage_errors_are_invalid_input(capsys):
    assert main(["run"]) == EXIT_INVALID
    assert main(["run", "--plan", "p.json", "--threads", "many"]) == EXIT_INVALID
    assert main(["--help"]) == EXIT_OK
