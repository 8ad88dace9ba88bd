"""Batch front end: parse an experiment config, run the solvers and the
property checks, and write fields plus reports to an output directory.

Configs are single YAML files; every run is reproducible from the
config and its seed.  Exit codes: 0 all good, 1 a requested check
failed, 2 the config did not validate, 3 a solver failed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .balayage import NoConvergence, balayage_solve
from .fixtures import ObstacleSpec, make_obstacle
from .grid import SpaceTimeGrid, field_to_csv
from .obstacle import InfeasibleObstacle, SolverDiverged, vi_solve
from .pme import NewtonDiverged, PmeParameters
from .verification import CHECK_NAMES, check_coincidence, render_table, run_suite

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

OUTDIR_ENV = "PME_OBSTACLE_OUTDIR"


class ConfigError(Exception):
    """Invalid experiment config; the message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    grid: SpaceTimeGrid
    obstacle: ObstacleSpec
    solver: PmeParameters
    sweep_tol: float | None
    slab_steps: int
    checks: tuple
    output_dir: str
    seed: int

    @property
    def m(self) -> float:
        return self.solver.m


_DEFAULTS = {
    "m": 0.5,
    "grid": {"d": 1, "nx": 101, "nt": 200, "T": 1.0},
    "obstacle": {"kind": "bump", "amplitude": 1.0, "center": 0.5,
                 "radius": 0.2, "window": [0.2, 0.8], "table": None,
                 "ramp_fraction": 0.25},
    "solver": {"newton_tol": 1e-10, "newton_max_iter": 50, "w_floor": 1e-14,
               "sweep_tol": None, "slab_steps": 10},
    "checks": list(CHECK_NAMES),
    "output_dir": "out",
    "seed": 0,
}


def _require(cond: bool, field: str, message: str):
    if not cond:
        raise ConfigError(f"{field}: {message}")


def _number(raw, field: str, positive: bool = False) -> float:
    if not isinstance(raw, (int, float)) or isinstance(raw, bool):
        raise ConfigError(f"{field}: expected a number, got {raw!r}")
    if positive and not raw > 0:
        raise ConfigError(f"{field}: must be > 0, got {raw}")
    return float(raw)


def _integer(raw, field: str, minimum: int = 1) -> int:
    if not isinstance(raw, int) or isinstance(raw, bool):
        raise ConfigError(f"{field}: expected an integer, got {raw!r}")
    if raw < minimum:
        raise ConfigError(f"{field}: must be >= {minimum}, got {raw}")
    return raw


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment config."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}")
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - set(_DEFAULTS)
    _require(not unknown, "config", f"unknown keys {sorted(unknown)}")
    merged = {}
    for key, default in _DEFAULTS.items():
        val = raw.get(key, default)
        if isinstance(default, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{key}: expected a mapping, got {val!r}")
            extra = set(val) - set(default)
            _require(not extra, key, f"unknown keys {sorted(extra)}")
            merged[key] = {**default, **val}
        else:
            merged[key] = val
    g = merged["grid"]
    d = _integer(g["d"], "grid.d", 1)
    _require(d in (1, 2), "grid.d", f"must be 1 or 2, got {d}")
    T = _number(g["T"], "grid.T", positive=True)
    nt = _integer(g["nt"], "grid.nt", 1)
    kwargs = {"d": d, "nx": _integer(g["nx"], "grid.nx", 1), "nt": nt, "T": T}
    if d == 2:
        _require("ny" in g, "grid.ny", "required in 2D")
        kwargs["ny"] = _integer(g["ny"], "grid.ny", 1)
    elif "ny" in g:
        raise ConfigError("grid.ny: only valid in 2D")
    grid = SpaceTimeGrid(**kwargs)

    m = _number(merged["m"], "m", positive=True)
    _require(m < 1.0, "m", f"must lie in (0,1), got {m}")
    s = merged["solver"]
    solver = PmeParameters(
        m=m,
        newton_tol=_number(s["newton_tol"], "solver.newton_tol", positive=True),
        newton_max_iter=_integer(s["newton_max_iter"], "solver.newton_max_iter"),
        w_floor=_number(s["w_floor"], "solver.w_floor"))
    sweep_tol = s["sweep_tol"]
    if sweep_tol is not None:
        sweep_tol = _number(sweep_tol, "solver.sweep_tol", positive=True)
    slab_steps = _integer(s["slab_steps"], "solver.slab_steps")

    o = dict(merged["obstacle"])
    kind = o.get("kind", "bump")
    _require(kind in ObstacleSpec.KINDS, "obstacle.kind",
             f"must be one of {ObstacleSpec.KINDS}, got {kind!r}")
    window = o.get("window")
    if window is not None:
        _require(isinstance(window, (list, tuple)) and len(window) == 2,
                 "obstacle.window", f"expected [t_on, t_off], got {window!r}")
        window = (_number(window[0], "obstacle.window[0]"),
                  _number(window[1], "obstacle.window[1]"))
        _require(0.0 <= window[0] < window[1] <= T, "obstacle.window",
                 f"must satisfy 0 <= t_on < t_off <= T, got {window}")
    center = o.get("center", 0.5)
    if isinstance(center, (list, tuple)):
        center = tuple(_number(c, "obstacle.center") for c in center)
    else:
        center = _number(center, "obstacle.center")
    try:
        spec = ObstacleSpec(
            kind=kind,
            amplitude=_number(o.get("amplitude", 1.0), "obstacle.amplitude"),
            center=center,
            radius=_number(o.get("radius", 0.2), "obstacle.radius", positive=True),
            window=window,
            ramp_fraction=_number(o.get("ramp_fraction", 0.25),
                                  "obstacle.ramp_fraction", positive=True),
            table=o.get("table"))
    except ValueError as exc:
        raise ConfigError(f"obstacle: {exc}")

    checks = merged["checks"]
    _require(isinstance(checks, (list, tuple)), "checks", "expected a list")
    for name in checks:
        _require(name in CHECK_NAMES, "checks",
                 f"unknown check {name!r}; expected from {CHECK_NAMES}")
    seed = _integer(merged["seed"], "seed", minimum=0)
    outdir = merged["output_dir"]
    _require(isinstance(outdir, str) and outdir, "output_dir",
             "expected a non-empty string")
    return ExperimentConfig(grid=grid, obstacle=spec, solver=solver,
                            sweep_tol=sweep_tol, slab_steps=slab_steps,
                            checks=tuple(checks), output_dir=outdir, seed=seed)


def _outdir(cfg: ExperimentConfig) -> Path:
    path = Path(os.environ.get(OUTDIR_ENV, cfg.output_dir))
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json_report(path: Path, payload: dict, timing: dict | None = None):
    """Deterministic JSON: everything outside the 'timing' key depends
    only on the config and seed."""
    doc = {"timing": timing or {}}
    doc.update(payload)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2,
                               separators=(",", ": ")) + "\n")


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _solve_all(cfg: ExperimentConfig):
    obstacle = make_obstacle(cfg.obstacle, cfg.grid)
    u_vi, contact, vi_report = vi_solve(obstacle, cfg.solver, cfg.grid)
    u_bal, bal_report = balayage_solve(obstacle, cfg.solver, cfg.grid,
                                       sweep_tol=cfg.sweep_tol,
                                       slab_steps=cfg.slab_steps)
    return obstacle, u_vi, contact, vi_report, u_bal, bal_report


def cmd_run(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    started = _timestamp()
    t0 = time.perf_counter()
    try:
        obstacle, u_vi, contact, vi_report, u_bal, bal_report = _solve_all(cfg)
    except (NewtonDiverged, SolverDiverged, NoConvergence,
            InfeasibleObstacle) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    field_to_csv(obstacle.psi, cfg.grid, out / "obstacle.csv", kind="obstacle")
    field_to_csv(u_vi, cfg.grid, out / "vi_solution.csv", kind="vi_solution")
    field_to_csv(u_bal, cfg.grid, out / "balayage_solution.csv",
                 kind="balayage_solution")
    contact.to_csv(out / "contact_mask.csv")
    decs = bal_report.extra.get("decrements", [])
    np.savetxt(out / "balayage_trace.csv",
               np.column_stack([np.arange(1, len(decs) + 1), decs]),
               fmt="%.17g", delimiter=",", header="sweep,decrement",
               comments="")
    gap = float(np.abs(u_vi.values - u_bal.values).max())
    for name, rep in (("vi_report.json", vi_report),
                      ("balayage_report.json", bal_report)):
        payload = rep.to_dict()
        timing = {"started": started, "wallclock": payload.pop("wallclock")}
        write_json_report(out / name, payload, timing)
    write_json_report(out / "run_summary.json",
                      {"solution_gap_sup": gap,
                       "grid": cfg.grid.meta(), "m": cfg.m,
                       "seed": cfg.seed},
                      {"started": started,
                       "wallclock": time.perf_counter() - t0})
    print(f"run complete: fields and reports in {out}")
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    started = _timestamp()
    t0 = time.perf_counter()
    try:
        reports = run_suite(cfg.obstacle, cfg.solver, cfg.grid,
                            checks=cfg.checks, seed=cfg.seed,
                            slab_steps=cfg.slab_steps)
    except (NewtonDiverged, SolverDiverged, NoConvergence,
            InfeasibleObstacle) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_json_report(out / "verdicts.json",
                      {"verdicts": [r.to_dict() for r in reports],
                       "seed": cfg.seed},
                      {"started": started,
                       "wallclock": time.perf_counter() - t0})
    print(render_table(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def cmd_convergence(cfg: ExperimentConfig, levels: int) -> int:
    out = _outdir(cfg)
    started = _timestamp()
    t0 = time.perf_counter()
    grids = [cfg.grid.coarsen() if cfg.grid.nx >= 3 and cfg.grid.nt >= 2
             else cfg.grid]
    while len(grids) < levels:
        grids.append(grids[-1].refine())
    try:
        report = check_coincidence(cfg.obstacle, cfg.solver, grids,
                                   slab_steps=cfg.slab_steps)
    except (NewtonDiverged, SolverDiverged, NoConvergence,
            InfeasibleObstacle) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    gaps = report.measured["gaps"]
    rows = np.column_stack([[g.nx for g in grids], [g.nt for g in grids], gaps])
    np.savetxt(out / "convergence_trace.csv", rows, fmt="%.17g",
               delimiter=",", header="nx,nt,gap_sup", comments="")
    write_json_report(out / "convergence.json", {"verdict": report.to_dict()},
                      {"started": started,
                       "wallclock": time.perf_counter() - t0})
    print(render_table([report]))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pme-obstacle",
        description="Obstacle problems for the fast-diffusion equation: "
                    "solve, cross-check, and emit reports.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "solve and dump fields and reports"),
                       ("verify", "run the property-check suite"),
                       ("convergence", "coincidence gap across refinements")):
        cp = sub.add_parser(name, help=text)
        cp.add_argument("config", help="path to the YAML experiment config")
        if name == "convergence":
            cp.add_argument("--levels", type=int, default=3,
                            help="number of refinement levels (default 3)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "convergence" and args.levels < 2:
            raise ConfigError("--levels: must be >= 2")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return cmd_run(cfg)
    if args.command == "verify":
        return cmd_verify(cfg)
    return cmd_convergence(cfg, args.levels)


if __name__ == "__main__":
    sys.exit(main())
