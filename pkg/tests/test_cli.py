from __future__ import annotations

import csv
import json

import pytest

from dbarlab import cli
from dbarlab.report import write_csv

BALL = {"kind": "ball", "n": 2, "radius": 1.0}
ANNULUS = {"envelope": BALL, "hole": {"kind": "ball", "n": 2, "radius": 0.4, "shell_thickness": 0.16}}

CASES = {
    "geometry": {"domain": {"kind": "ellipsoid", "semi_axes": [1.0, 0.7]}, "samples": 40},
    "check-convexity": {"domain": BALL, "q": 1, "samples": 200, "trials": 50},
    "verify": {"domain": BALL, "q": 1, "resolution": 8, "forms": 1, "samples": 10, "identities": ["pointwise", "mkh"]},
    "constants": {"annulus": ANNULUS, "margins": [0.04, 0.12], "K": 1.0, "E": 1.0, "C_w1": 1.0, "samples": 200},
    "solve": {"domain": BALL, "q": 1, "resolution": 8},
    "cohomology": {"domain": BALL, "q": 1, "resolutions": [8]},
    "pipeline": {"annulus": ANNULUS, "q": 1, "resolution": 8},
}


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


def _run(tmp_path, task, data, out="out", extra=()):
    cfg = _write(tmp_path, data)
    return cli.main([task, "--config", str(cfg), "--out", str(tmp_path / out), "--quiet", *extra])


@pytest.mark.parametrize("task", sorted(CASES))
def test_every_task_writes_a_bundle(tmp_path, task):
    assert _run(tmp_path, task, CASES[task]) == cli.EXIT_PASS
    out = tmp_path / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "pass"
    assert manifest["config"]["task"] == task
    assert set(manifest["versions"]) >= {"dbarlab", "numpy", "scipy"}
    for name in manifest["outputs"]:
        assert (out / name).exists()
    for table in out.glob("*.csv"):
        rows = list(csv.DictReader(table.open()))
        assert rows and all(r["anchor"] for r in rows), table.name


def test_figures_sit_next_to_the_csv(tmp_path):
    assert _run(tmp_path, "verify", CASES["verify"]) == 0
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert {"residuals.csv", "residuals.png", "pointwise.png"} <= names


def test_csv_output_is_deterministic(tmp_path):
    for out in ("a", "b"):
        assert _run(tmp_path, "solve", CASES["solve"], out=out, extra=("--seed", "7")) == 0
    assert (tmp_path / "a" / "solve.csv").read_bytes() == (tmp_path / "b" / "solve.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 7


def test_unknown_key_names_field_and_line(tmp_path, capsys):
    assert _run(tmp_path, "solve", {"q": 1, "bogus": 2}) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "'bogus'" in err and "line 3" in err


def test_malformed_json_reports_the_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "q": 1,\n}\n')
    assert cli.main(["solve", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_q_zero_for_the_mixed_solve_is_a_config_error(tmp_path, capsys):
    assert _run(tmp_path, "solve", {"annulus": ANNULUS, "bc": "mixed", "q": 0}) == cli.EXIT_CONFIG
    assert "'q'" in capsys.readouterr().err


def test_task_mismatch(tmp_path, capsys):
    assert _run(tmp_path, "solve", {"task": "verify"}) == cli.EXIT_CONFIG
    assert "'task'" in capsys.readouterr().err


def test_bad_domain_kind(tmp_path, capsys):
    assert _run(tmp_path, "geometry", {"domain": {"kind": "torus"}}) == cli.EXIT_CONFIG
    assert "domain.kind" in capsys.readouterr().err


def test_failed_check_exits_one(tmp_path):
    data = {"domain": {"kind": "dumbbell"}, "q": 1, "samples": 500, "trials": 50}
    assert _run(tmp_path, "check-convexity", data) == cli.EXIT_FAIL
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["status"] == "fail"


def test_numerical_failure_exits_three(tmp_path, capsys):
    tiny = {"envelope": BALL, "hole": {"kind": "ball", "n": 2, "radius": 0.05, "shell_thickness": 0.02}}
    assert _run(tmp_path, "cohomology", {"annulus": tiny, "q": 1, "resolutions": [8]}) == cli.EXIT_NUMERICAL
    assert "ResolutionTooCoarse" in capsys.readouterr().err


def test_resolution_flag_overrides_config(tmp_path):
    assert _run(tmp_path, "solve", CASES["solve"], extra=("--resolution", "9")) == 0
    row = next(csv.DictReader((tmp_path / "out" / "solve.csv").open()))
    assert row["resolution"] == "9"


def test_write_csv_uses_unix_line_endings(tmp_path):
    path = write_csv(tmp_path / "t.csv", [{"a": 1, "b": "x"}])
    assert path.read_bytes() == b"a,b\n1,x\n"
