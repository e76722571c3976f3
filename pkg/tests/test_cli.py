import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from halfstokes.cli import EXIT_CHECK, EXIT_INPUT, EXIT_OK, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_WHOLE = {
    "datum": {"name": "wholespace_gaussian", "params": {"center": [0, 0, 0], "width": 0.6, "direction": [0, 0, 1]}},
    "grid": {"kind": "whole", "L": 10.0, "N": 32},
    "times": [0.05, 0.1, 0.2, 0.3, 0.5],
    # analytic radius of the sampled Gaussian (coarse sampling rings above the threshold)
    "support": 3.8,
    "checks": ["weighted_norm", "monotonicity", "decay"],
}


def _write(path: Path, doc) -> Path:
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return path


@pytest.fixture
def small_cfg(tmp_path):
    return _write(tmp_path / "small.json", SMALL_WHOLE)


def test_missing_config_is_input_error(tmp_path):
    assert main(["evolve"]) == EXIT_INPUT
    assert main(["evolve", "--config", str(tmp_path / "nope.json")]) == EXIT_INPUT


def test_malformed_config_is_input_error(tmp_path):
    assert main(["evolve", "--config", str(_write(tmp_path / "bad.json", "{not json"))]) == EXIT_INPUT
    assert main(["evolve", "--config", str(_write(tmp_path / "short.json", {"grid": {}}))]) == EXIT_INPUT
    cfg = dict(SMALL_WHOLE, checks=["bogus"])
    assert main(["evolve", "--config", str(_write(tmp_path / "chk.json", cfg))]) == EXIT_INPUT


def test_unknown_suite_and_bad_jobs(tmp_path):
    assert main(["suite", "nonsense", "--out", str(tmp_path)]) == EXIT_INPUT
    assert main(["suite", "weights", "--jobs", "0", "--out", str(tmp_path)]) == EXIT_INPUT


def test_report_on_empty_dir_is_input_error(tmp_path):
    assert main(["report", str(tmp_path)]) == EXIT_INPUT
    assert main(["report", str(tmp_path / "missing")]) == EXIT_INPUT


def test_dry_run_writes_nothing(tmp_path, small_cfg, capsys):
    out = tmp_path / "run"
    assert main(["evolve", "--config", str(small_cfg), "--out", str(out), "--dry-run"]) == EXIT_OK
    assert not out.exists()
    plan = json.loads(capsys.readouterr().out)
    assert plan["times"][-1] == 0.5
    assert main(["suite", "all", "--dry-run", "--out", str(tmp_path / "s")]) == EXIT_OK
    assert not (tmp_path / "s").exists()


def test_set_override_reaches_plan(tmp_path, small_cfg, capsys):
    args = ["evolve", "--config", str(small_cfg), "--dry-run", "--set", "grid.N=24", "--set", "times=[0.1,0.2]"]
    assert main(args) == EXIT_OK
    plan = json.loads(capsys.readouterr().out)
    assert plan["grid"]["shape"][0] == 24 and plan["times"] == [0.1, 0.2]


def test_shipped_configs_validate(tmp_path):
    for name in ("half_gauss.json", "whole_gauss.json"):
        assert main(["evolve", "--config", str(CONFIGS / name), "--dry-run"]) == EXIT_OK
    assert main(["decompose", "--config", str(CONFIGS / "decompose_random.json"), "--dry-run"]) == EXIT_OK


def test_evolve_then_report_is_deterministic(tmp_path, small_cfg):
    out = tmp_path / "runs" / "small"
    assert main(["evolve", "--config", str(small_cfg), "--out", str(out)]) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    for f in man["files"]:
        assert (out / f).exists()
    assert (out / "report.csv").exists() and (out / "velocity_slice.png").exists()
    root = tmp_path / "runs"
    assert main(["report", str(root)]) == EXIT_OK
    first = {p: (root / p).read_bytes() for p in ("merged_report.json", "merged_report.csv")}
    assert main(["report", str(root)]) == EXIT_OK
    for p, b in first.items():
        assert (root / p).read_bytes() == b


def test_report_fails_when_a_check_fails(tmp_path):
    d = tmp_path / "r" / "a"
    d.mkdir(parents=True)
    _write(d / "report.json", {"checks": [{"check": "x", "predicted": "", "measured": "1", "tolerance": "",
                                           "pass": False}]})
    assert main(["report", str(tmp_path / "r")]) == EXIT_CHECK


def test_decompose_small(tmp_path):
    out = tmp_path / "dec"
    args = ["decompose", "--config", str(CONFIGS / "decompose_random.json"), "--out", str(out),
            "--set", "grid.N=32", "--set", "trials=10"]
    assert main(args) == EXIT_OK
    doc = json.loads((out / "decomp_report.json").read_text())
    assert doc["residuals"]["recomposition"] <= 1e-10


def test_weights_suite_writes_reports(tmp_path):
    out = tmp_path / "w"
    assert main(["suite", "weights", "--out", str(out)]) == EXIT_OK
    assert (out / "report.json").exists() and (out / "report.csv").exists()
    assert json.loads((out / "report.json").read_text())["all_pass"]


def test_console_script_entry_point(tmp_path):
    env = dict(os.environ, STOKES_CACHE_DIR=str(tmp_path / "c"))
    r = subprocess.run([sys.executable, "-m", "halfstokes.cli", "suite", "nope"], capture_output=True,
                       text=True, env=env)
    assert r.returncode == EXIT_INPUT
    assert "unknown suite" in r.stderr
