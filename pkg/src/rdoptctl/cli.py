"""``rd-optctl`` command-line driver.

Exit codes: 0 success, 2 configuration or input error, 3 solver divergence,
4 optimizer hit ``max_iter``, 5 optimal control did not beat its constant
equivalent.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ConfigError, RunConfig
from .errors import (DegenerateInputError, DivergenceError, EmptyMeshError,
                     InvalidArgumentError, SolverFailureError)
from .export import (_write_csv, export_burden_timeseries, export_control_csv,
                     export_field_vtk, export_snapshots, fmt)
from .ingest import ingestion_summary
from .optimize import compare_with_constant, optimize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_NOT_CONVERGED = 4
EXIT_NOT_DOMINANT = 5

logger = logging.getLogger("rdoptctl")


def _write_json(path, data):
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _report_dict(report, extra=None):
    d = {
        "method": report.method,
        "alpha": report.alpha,
        "iterations": report.iterations,
        "converged": report.converged,
        "final_J": report.final_J,
        "final_residual_norm": report.final_residual_norm,
    }
    d.update(extra or {})
    return d


def cmd_simulate(cfg, out_dir=None):
    problem = cfg.problem()
    spec = cfg.export_spec(out_dir)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    grid = problem.grid
    control = cfg.fixed_control(grid)
    state = problem.state(control)
    export_control_csv(grid, control, spec.out_dir / "control.csv")
    export_burden_timeseries(state, spec.out_dir / "burden.csv")
    export_snapshots(state, spec)
    print(f"simulated {grid.n_steps} steps on {problem.mesh}; outputs in {spec.out_dir}")
    return EXIT_OK


def _optimize_one(cfg, alpha, out_dir):
    """Run one optimization and write its files. Returns (exit code, summary)."""
    problem = cfg.problem()
    spec = cfg.export_spec(out_dir)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    report = optimize(problem, cfg.optimize_config(alpha))
    export_control_csv(problem.grid, report.final_control, spec.out_dir / "control.csv", report)
    export_burden_timeseries(report.final_state, spec.out_dir / "burden.csv")
    _write_csv(spec.out_dir / "residual.csv", ["t", "g"], [problem.grid.times, report.final_residual])
    export_snapshots(report.final_state, spec)
    _write_json(spec.out_dir / "report.json", _report_dict(report))
    code = EXIT_OK if report.converged else EXIT_NOT_CONVERGED
    summary = (f"alpha={fmt(alpha)} method={report.method} iterations={report.iterations} "
               f"converged={report.converged} J={fmt(report.final_J)} "
               f"residual_norm={report.final_residual_norm:.6e}")
    return code, summary


def _optimize_job(args):
    values, base_dir, alpha, out_dir = args
    cfg = RunConfig.from_dict(values, base_dir)
    return _optimize_one(cfg, alpha, out_dir)


def cmd_optimize(cfg, out_dir=None, jobs=1):
    alphas = cfg.alphas()
    base = cfg.export_spec(out_dir).out_dir
    if len(alphas) == 1:
        code, summary = _optimize_one(cfg, alphas[0], base)
        print(summary)
        return code
    # sweep: one subdirectory per alpha
    tasks = [(cfg.given, str(cfg.base_dir), a, base / f"alpha_{a:g}") for a in alphas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_optimize_job, tasks))
    else:
        results = [_optimize_one(cfg, a, d) for _, _, a, d in tasks]
    for _, summary in results:
        print(summary)
    return max(code for code, _ in results)


def cmd_compare(cfg, out_dir=None):
    alphas = cfg.alphas()
    if len(alphas) != 1:
        raise ConfigError("compare takes a single objective.alpha")
    problem = cfg.problem()
    spec = cfg.export_spec(out_dir)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    grid = problem.grid
    cmp = compare_with_constant(problem, cfg.optimize_config(alphas[0]))
    report = cmp.report
    export_control_csv(grid, report.final_control, spec.out_dir / "control.csv", report)
    export_control_csv(grid, cmp.constant, spec.out_dir / "control_constant.csv")
    export_burden_timeseries(report.final_state, spec.out_dir / "burden.csv")
    export_burden_timeseries(cmp.state_constant, spec.out_dir / "burden_constant.csv")
    _write_csv(spec.out_dir / "residual.csv", ["t", "g_optimal", "g_constant"],
               [grid.times, report.final_residual, cmp.residual_constant])
    export_snapshots(report.final_state, spec, "u_opt")
    export_snapshots(cmp.state_constant, spec, "u_const")
    _write_json(spec.out_dir / "report.json", _report_dict(report, {
        "J_optimal": cmp.J_optimal,
        "J_constant": cmp.J_constant,
        "constant_control": float(cmp.constant.values[0]),
        "residual_norm_constant": cmp.residual_norm_constant,
        "dominates": cmp.dominates,
    }))
    print(f"J(C*)      = {fmt(cmp.J_optimal)}  residual_norm = {report.final_residual_norm:.6e}")
    print(f"J(C_const) = {fmt(cmp.J_constant)}  residual_norm = {cmp.residual_norm_constant:.6e}"
          f"  (C_const = {fmt(cmp.constant.values[0])})")
    if not cmp.dominates:
        print("error: optimal control does not beat the constant control", file=sys.stderr)
        return EXIT_NOT_DOMINANT
    if not report.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_ingest(cfg, out_dir=None):
    if cfg.dim != 2:
        raise ConfigError("ingest needs dim = 2 and mesh.image")
    mesh, u0 = cfg.mesh_and_u0()
    spec = cfg.export_spec(out_dir)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    export_field_vtk(mesh, None, spec.out_dir / "mesh.vtk", title="rdoptctl mesh")
    export_field_vtk(mesh, u0, spec.out_dir / "u0.vtk", name="u0", title="rdoptctl initial condition")
    summary = ingestion_summary(mesh, u0)
    text = "".join(f"{k} = {fmt(v) if isinstance(v, float) else v}\n" for k, v in summary.items())
    (spec.out_dir / "summary.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "compare": cmd_compare,
    "ingest": cmd_ingest,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="rd-optctl",
        description="Optimal dosing for the controlled Fisher reaction-diffusion model.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.add_argument("--out", default=None, help="output directory (overrides export.out_dir)")
    p.add_argument("--seed", type=int, default=None,
                   help="recorded for reproducibility; the pipeline itself is deterministic")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for alpha sweeps")
    return p


def _setup_logging():
    level = os.environ.get("RDOPTCTL_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging()
    if args.seed is not None:
        np.random.seed(args.seed)
    try:
        cfg = RunConfig.from_file(args.config)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.out, max(1, args.jobs))
        return COMMANDS[args.command](cfg, args.out)
    except (ConfigError, InvalidArgumentError, EmptyMeshError, DegenerateInputError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, SolverFailureError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
