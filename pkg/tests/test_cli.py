import json
import os

import numpy as np
import pytest
import yaml

from pme_obstacle import cli
from pme_obstacle.cli import (ConfigError, ExperimentConfig, load_config, main)
from pme_obstacle.grid import field_from_csv, field_to_csv


def write_cfg(tmp_path, name="cfg.yaml", **overrides):
    cfg = {
        "m": 0.5,
        "grid": {"d": 1, "nx": 21, "nt": 20, "T": 1.0},
        "obstacle": {"kind": "bump", "amplitude": 1.0, "center": 0.5,
                     "radius": 0.2, "window": [0.2, 0.8]},
        "checks": ["comparison", "positivity_slabs"],
        "output_dir": str(tmp_path / "out"),
        "seed": 1,
    }
    for key, val in overrides.items():
        if isinstance(val, dict) and key in cfg and isinstance(cfg[key], dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_load_config_defaults(tmp_path):
    path = tmp_path / "min.yaml"
    path.write_text("{}\n")
    cfg = load_config(path)
    assert cfg.grid.nx == 101 and cfg.grid.nt == 200
    assert cfg.obstacle.kind == "bump"
    assert cfg.m == 0.5


def test_load_config_field_errors(tmp_path):
    cases = [
        ({"grid": {"T": -2.0}}, "grid.T"),
        ({"grid": {"nt": 0}}, "grid.nt"),
        ({"grid": {"nx": "many"}}, "grid.nx"),
        ({"m": 1.5}, "m"),
        ({"obstacle": {"kind": "wedge"}}, "obstacle.kind"),
        ({"obstacle": {"window": [0.9, 0.1]}}, "obstacle.window"),
        ({"checks": ["nope"]}, "checks"),
        ({"solver": {"newton_tol": -1.0}}, "solver.newton_tol"),
    ]
    for overrides, field in cases:
        path = write_cfg(tmp_path, **overrides)
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert field in str(err.value)


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("gird: {}\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_malformed_config_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, grid={"T": -1.0})
    assert main(["run", str(path)]) == cli.EXIT_CONFIG
    assert "grid.T" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == cli.EXIT_CONFIG


def test_run_zero_obstacle_writes_zero_fields(tmp_path):
    path = write_cfg(tmp_path, obstacle={"kind": "zero"})
    assert main(["run", str(path)]) == cli.EXIT_OK
    out = tmp_path / "out"
    vals, _ = field_from_csv(out / "vi_solution.csv")
    assert np.abs(vals).max() == 0.0
    vals, _ = field_from_csv(out / "balayage_solution.csv")
    assert np.abs(vals).max() == 0.0
    summary = json.loads((out / "run_summary.json").read_text())
    assert summary["solution_gap_sup"] == 0.0


def test_run_bump_fixture_artifacts(tmp_path):
    path = write_cfg(tmp_path)
    assert main(["run", str(path)]) == cli.EXIT_OK
    out = tmp_path / "out"
    for name in ("obstacle.csv", "vi_solution.csv", "balayage_solution.csv",
                 "contact_mask.csv", "balayage_trace.csv", "vi_report.json",
                 "balayage_report.json", "run_summary.json"):
        assert (out / name).exists(), name
    rep = json.loads((out / "vi_report.json").read_text())
    assert rep["steps"] == 20
    assert len(rep["newton_iters"]) == 20
    assert "wallclock" in rep["timing"]
    trace = np.loadtxt(out / "balayage_trace.csv", delimiter=",", skiprows=1,
                       ndmin=2)
    assert trace.shape[1] == 2


def test_verify_exit_codes(tmp_path, monkeypatch):
    path = write_cfg(tmp_path)
    assert main(["verify", str(path)]) == cli.EXIT_OK
    verdicts = json.loads((tmp_path / "out" / "verdicts.json").read_text())
    assert all(v["passed"] for v in verdicts["verdicts"])

    from pme_obstacle.verification import VerdictReport

    def failing_suite(*args, **kwargs):
        return [VerdictReport(check="x", claim="c", measured={},
                              threshold={}, passed=False)]

    monkeypatch.setattr(cli, "run_suite", failing_suite)
    assert main(["verify", str(path)]) == cli.EXIT_CHECK_FAILED


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    path = write_cfg(tmp_path)

    def boom(*args, **kwargs):
        from pme_obstacle.pme import NewtonDiverged
        raise NewtonDiverged("forced")

    monkeypatch.setattr(cli, "vi_solve", boom)
    assert main(["run", str(path)]) == cli.EXIT_SOLVER


def test_convergence_command(tmp_path):
    path = write_cfg(tmp_path, grid={"nx": 11, "nt": 8})
    assert main(["convergence", str(path), "--levels", "3"]) == cli.EXIT_OK
    out = tmp_path / "out"
    trace = np.loadtxt(out / "convergence_trace.csv", delimiter=",",
                       skiprows=1, ndmin=2)
    assert trace.shape == (3, 3)
    doc = json.loads((out / "convergence.json").read_text())
    assert doc["verdict"]["check"] == "coincidence"


def test_convergence_levels_validation(tmp_path, capsys):
    path = write_cfg(tmp_path)
    assert main(["convergence", str(path), "--levels", "1"]) == cli.EXIT_CONFIG


def test_output_dir_env_override(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, obstacle={"kind": "zero"})
    override = tmp_path / "elsewhere"
    monkeypatch.setenv(cli.OUTDIR_ENV, str(override))
    assert main(["run", str(path)]) == cli.EXIT_OK
    assert (override / "run_summary.json").exists()
    assert not (tmp_path / "out").exists()


def _strip_timing(path):
    doc = json.loads(path.read_text())
    doc.pop("timing", None)
    return json.dumps(doc, sort_keys=True)


def test_reports_deterministic_modulo_timing(tmp_path):
    path = write_cfg(tmp_path, output_dir=str(tmp_path / "a"))
    assert main(["run", str(path)]) == cli.EXIT_OK
    assert main(["verify", str(path)]) == cli.EXIT_OK
    path2 = write_cfg(tmp_path, name="cfg2.yaml",
                      output_dir=str(tmp_path / "b"))
    assert main(["run", str(path2)]) == cli.EXIT_OK
    assert main(["verify", str(path2)]) == cli.EXIT_OK
    for name in ("run_summary.json", "vi_report.json",
                 "balayage_report.json", "verdicts.json"):
        a = _strip_timing(tmp_path / "a" / name)
        b = _strip_timing(tmp_path / "b" / name)
        assert a == b, name
    for name in ("vi_solution.csv", "balayage_solution.csv",
                 "contact_mask.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_custom_table_config_roundtrip(tmp_path):
    from pme_obstacle import SpaceTimeGrid
    from pme_obstacle.fixtures import default_spec, make_obstacle
    g = SpaceTimeGrid(d=1, nx=21, nt=20, T=1.0)
    ob = make_obstacle(default_spec(), g)
    table = tmp_path / "psi.csv"
    field_to_csv(ob.psi, g, table, kind="obstacle")
    path = write_cfg(tmp_path,
                     obstacle={"kind": "custom-table", "table": str(table)})
    assert main(["run", str(path)]) == cli.EXIT_OK
    saved, _ = field_from_csv(tmp_path / "out" / "obstacle.csv")
    assert np.array_equal(saved, ob.psi.values)
