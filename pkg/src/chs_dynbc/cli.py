"""Command line front end: ``chs-dynbc run | verify | stability | convergence | sweep``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import acceptance
from .config import (ConfigError, RunConfig, build_problem, grid_points, load_config,
                     parse_config, serialize, validate_config, with_override)
from .diagnostics.experiments import StabilityReport, observed_order, stability_experiment
from .diagnostics.norms import l2
from .io import (write_failure, write_mesh_csv, write_rows, write_snapshot, write_timeseries,
                 write_vtk)
from .stepper import (NewtonError, SimulationError, constant_control, refine_blocks, refine_eps,
                      run_simulation, sinusoid_control)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
SOLVER_ERRORS = (SimulationError, NewtonError, FloatingPointError, np.linalg.LinAlgError)

STABILITY_COLUMNS = ("p", "mu_linf_H", "mu_l2_V", "rho_h1_H", "rho_c0_V", "rho_l2_H2",
                     "rho_gamma_h1_H", "rho_gamma_c0_V", "rho_gamma_l2_H2", "lhs",
                     "control_l2", "ratio")
DIFFERENCE_COLUMNS = ("pair", "value_coarse", "value_fine", "rho_diff", "mu_diff")
RATIO_COLUMNS = ("index", "rho_ratio", "mu_ratio", "rho_order", "mu_order")
SWEEP_COLUMNS = ("point", "params", "status", "message", "steps", "t_final", "energy_total",
                 "mu_energy", "mu_min", "rho_min", "rho_max", "xi_max_abs", "newton_iters")
VERIFY_COLUMNS = ("criterion", "passed", "measured", "seconds", "budget")


def _echo(msg: str) -> None:
    print(msg, flush=True)


def _error(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _load(path: Optional[str]) -> RunConfig:
    if path is None:
        return parse_config("")
    return load_config(path)


def _jobs(requested: int) -> int:
    env = os.environ.get("CHS_DYNBC_JOBS")
    if env is not None:
        try:
            requested = int(env)
        except ValueError:
            raise ConfigError(f"CHS_DYNBC_JOBS must be an integer, got {env!r}")
    if requested < 1:
        raise ConfigError("--jobs must be at least 1")
    return requested


def _map(func, items, jobs: int) -> list:
    if jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------------------
# run

def cmd_run(cfg: RunConfig, out: Path, vtk: bool = False) -> int:
    problem = build_problem(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(serialize(cfg), encoding="utf-8")
    write_mesh_csv(out / "mesh.csv", problem.ops.mesh)
    try:
        traj = run_simulation(cfg.scheme, problem)
    except SOLVER_ERRORS as exc:
        path = write_failure(out / "failure.json", type(exc).__name__, str(exc), command="run")
        _error(f"solver failure: {exc} (record: {path})")
        return EXIT_SOLVER
    write_timeseries(out / "timeseries.csv", traj)
    vtk = vtk or cfg.output.vtk
    every = cfg.output.snapshot_every
    nominal = traj.nominal_indices()
    chosen = [k for j, k in enumerate(nominal) if every and j % every == 0]
    if nominal[-1] not in chosen:
        chosen.append(nominal[-1])
    snap_dir = out / "snapshots"
    for k in chosen:
        s = traj.states[k]
        fields = {"mu": s.mu, "rho": s.rho, "xi": s.xi}
        write_snapshot(snap_dir / f"snapshot_{k:06d}.csv", problem.ops.mesh, fields)
        if vtk:
            write_vtk(snap_dir / f"snapshot_{k:06d}.vtk", problem.ops.mesh, fields,
                      title=f"t = {s.t:.17g}")
    for flag in traj.flags:
        _error(f"warning: {flag}")
    _echo(f"run: {len(traj) - 1} steps to t = {traj.times[-1]:.6g}, "
          f"{len(chosen)} snapshot(s) in {snap_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def cmd_verify(only: Optional[Sequence[str]], out: Optional[Path]) -> int:
    names = list(acceptance.CRITERIA) if not only else list(only)
    unknown = [n for n in names if n not in acceptance.CRITERIA]
    if unknown:
        raise ConfigError(f"unknown criteria: {', '.join(unknown)} "
                          f"(known: {', '.join(acceptance.CRITERIA)})")
    results = acceptance.run_criteria(names, echo=_echo)
    failed = [r.name for r in results if not r.passed]
    if out is not None:
        write_rows(out / "verify.csv", VERIFY_COLUMNS,
                   [{"criterion": r.name, "passed": r.passed, "measured": r.measured,
                     "seconds": r.seconds, "budget": r.budget} for r in results])
    if failed:
        _echo(f"FAILED: {', '.join(failed)}")
        return EXIT_VERIFY
    _echo(f"all {len(results)} criteria passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# stability

def _stability_point(args) -> dict:
    cfg, p = args
    problem = build_problem(cfg)
    nb = problem.ops.nb
    spec = cfg.stability
    if spec.direction == "constant":
        phi = constant_control(nb, spec.amplitude)
    else:
        phi = sinusoid_control(nb, spec.amplitude, cfg.control.period)
    u1 = problem.control
    u2 = u1 if p == 0 else u1 + phi.scaled(p)
    report: StabilityReport = stability_experiment(cfg.scheme, problem, u1, u2)
    return {"p": p, **report.as_row()}


def cmd_stability(cfg: RunConfig, out: Path, jobs: int) -> int:
    problem = build_problem(cfg)
    if not (problem.bulk.smooth and problem.boundary.smooth):
        raise ConfigError("stability: the potentials must be C^2 inside their domains "
                          "(obstacle-type potentials are refused)")
    rows = _map(_stability_point, [(cfg, p) for p in cfg.stability.scales], jobs)
    write_rows(out / "stability.csv", STABILITY_COLUMNS, rows)
    for row in rows:
        _echo(f"p = {row['p']:g}: lhs = {row['lhs']:.6e}, ratio = {row['ratio']:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# convergence

def _final_state(cfg: RunConfig):
    problem = build_problem(cfg)
    return problem.ops, run_simulation(cfg.scheme, problem).states[-1]


def cmd_convergence(cfg: RunConfig, out: Path, jobs: int) -> int:
    conv = cfg.convergence
    values = list(conv.values)
    if conv.parameter in ("eps", "n_blocks"):
        problem = build_problem(cfg)
        if conv.parameter == "eps":
            report = refine_eps(problem, cfg.scheme, values)
        else:
            report = refine_blocks(problem, cfg.scheme, [int(v) for v in values])
        rho_d, mu_d = report.rho_diffs, report.mu_diffs
    else:
        if conv.parameter == "dt":
            members = [replace(cfg, scheme=replace(cfg.scheme, dt=v)) for v in values]
        else:
            if cfg.mesh.kind != "interval":
                raise ConfigError("convergence in n needs an interval mesh")
            members = [with_override(cfg, "mesh.n", int(v)) for v in values]
        finals = _map(_final_state, members, jobs)
        rho_d, mu_d = [], []
        for (ops_a, a), (ops_b, b) in zip(finals, finals[1:]):
            stride = (ops_b.n - 1) // (ops_a.n - 1)
            if stride < 1 or (ops_b.n - 1) != stride * (ops_a.n - 1):
                raise ConfigError("convergence in n needs nested meshes (n increasing by an integer factor)")
            rho_d.append(l2(ops_a, a.rho - b.rho[::stride]))
            mu_d.append(l2(ops_a, a.mu - b.mu[::stride]))
    diffs = [{"pair": i, "value_coarse": values[i], "value_fine": values[i + 1],
              "rho_diff": rho_d[i], "mu_diff": mu_d[i]} for i in range(len(rho_d))]
    ratios = []
    for i in range(len(rho_d) - 1):
        factor = values[i] / values[i + 1]
        if conv.parameter in ("n", "n_blocks"):
            factor = 1.0 / factor
        row = {"index": i,
               "rho_ratio": rho_d[i] / rho_d[i + 1] if rho_d[i + 1] > 0 else math.inf,
               "mu_ratio": mu_d[i] / mu_d[i + 1] if mu_d[i + 1] > 0 else math.inf}
        for name, d in (("rho", rho_d), ("mu", mu_d)):
            ok = d[i] > 0 and d[i + 1] > 0 and factor > 0 and factor != 1
            row[f"{name}_order"] = observed_order(d[i:i + 2], factor)[0] if ok else math.nan
        ratios.append(row)
    write_rows(out / "convergence_differences.csv", DIFFERENCE_COLUMNS, diffs)
    write_rows(out / "convergence_ratios.csv", RATIO_COLUMNS, ratios)
    for row in ratios:
        _echo(f"ratio {row['index']}: rho {row['rho_ratio']:.4f}, mu {row['mu_ratio']:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _sweep_point(args) -> dict:
    index, cfg, params, out = args
    row = {"point": index, "params": ";".join(f"{k}={v}" for k, v in params)}
    try:
        for key, value in params:
            cfg = with_override(cfg, key, value)
        validate_config(cfg)
        problem = build_problem(cfg)
        traj = run_simulation(cfg.scheme, problem)
    except ConfigError as exc:
        return {**row, "status": "config_error", "message": str(exc)}
    except SOLVER_ERRORS as exc:
        return {**row, "status": "solver_error", "message": f"{type(exc).__name__}: {exc}"}
    write_timeseries(out / f"point_{index:04d}" / "timeseries.csv", traj)
    last = traj.rows()[-1]
    return {**row, "status": "ok", "message": "", "steps": len(traj) - 1,
            "t_final": last["t"], "energy_total": last["energy_total"],
            "mu_energy": last["mu_energy"], "mu_min": float(np.min(traj.field("mu"))),
            "rho_min": float(np.min(traj.field("rho"))),
            "rho_max": float(np.max(traj.field("rho"))),
            "xi_max_abs": float(np.max(np.abs(traj.field("xi")))),
            "newton_iters": int(sum(traj.newton_iters))}


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int) -> int:
    points = grid_points(cfg)
    rows = _map(_sweep_point, [(i, cfg, p, out) for i, p in enumerate(points)], jobs)
    write_rows(out / "sweep.csv", SWEEP_COLUMNS, rows)
    failed = [r for r in rows if r["status"] != "ok"]
    _echo(f"sweep: {len(rows)} point(s), {len(failed)} failed")
    for r in failed:
        _error(f"point {r['point']} ({r['params']}): {r['status']}: {r['message']}")
    return EXIT_SOLVER if failed else EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chs-dynbc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "simulate one configuration"),
                        ("verify", "run the acceptance criteria"),
                        ("stability", "control-perturbation stability experiment"),
                        ("convergence", "refinement study with pairwise differences"),
                        ("sweep", "independent runs over a parameter grid")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", default="out", help="output directory (default: out)")
        if name == "verify":
            p.add_argument("--only", default=None,
                           help="comma-separated criterion names: " + ", ".join(acceptance.CRITERIA))
            continue
        p.add_argument("--config", default=None, help="TOML configuration (default: built-in demo)")
        if name == "run":
            p.add_argument("--vtk", action="store_true", help="also write legacy VTK snapshots")
        else:
            p.add_argument("--jobs", type=int, default=1,
                           help="worker processes (CHS_DYNBC_JOBS overrides)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "verify":
            only = [s.strip() for s in args.only.split(",") if s.strip()] if args.only else None
            return cmd_verify(only, out)
        cfg = _load(args.config)
        if args.command == "run":
            return cmd_run(cfg, out, args.vtk)
        jobs = _jobs(args.jobs)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "stability":
            return cmd_stability(cfg, out, jobs)
        if args.command == "convergence":
            return cmd_convergence(cfg, out, jobs)
        return cmd_sweep(cfg, out, jobs)
    except ConfigError as exc:
        if exc.line is not None:
            _error(f"config error (line {exc.line}):")
        else:
            _error("config error:")
        for v in exc.violations:
            _error(f"  - {v}")
        return EXIT_CONFIG
    except SOLVER_ERRORS as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_failure(out / "failure.json", type(exc).__name__, str(exc), command=args.command)
        _error(f"solver failure: {exc}")
        return EXIT_SOLVER
    except ValueError as exc:   # parameter combinations rejected by the library
        _error(f"config error:\n  - {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
