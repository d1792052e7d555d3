"""Command-line interface: ``windjoint {evaluate,optimize,flowfield,sweep}``.

Exit codes: 0 on success (possibly with warnings), 1 for invalid input,
2 for numerical failures inside the model or the optimizers.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .control import ControlSolveOptions
from .fixtures import resolve
from .layout import LayoutProblem, PsoOptions, build_report, control_only, layout_only, sequential_optimize
from .scenarios import (
    ControlPlan, discretize_rose, load_config, load_layout, load_report, load_wind_rose, save_layout,
    save_report,
)
from .wake import Inflow, WakeDomainError, velocity_field

logger = logging.getLogger("windjoint")

DEFAULT_SEED = 0
MODES = ("pso", "sequential", "dbhm", "control-only")


class CliError(Exception):
    """Invalid user input; reported with exit code 1."""


def _common(p: argparse.ArgumentParser, layout_required: bool = True):
    p.add_argument("--config", required=True, help="JSON farm configuration (or fixture:NAME)")
    p.add_argument("--rose", required=True, help="wind rose CSV (or fixture:NAME)")
    p.add_argument("--layout", required=layout_required, help="layout CSV turbine_id,x_m,y_m")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scenarios", type=int, default=None, help="re-bin the rose to this many sectors")
    p.add_argument("--threads", type=int, default=1, help="worker threads for scenario solves")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    p.add_argument("--fix-alpha", action="store_true", help="hold induction at 1/3 while optimizing")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="windjoint", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="AEP of a layout under greedy or given controls")
    _common(ev)
    ev.add_argument("--plan", help="report JSON whose control plan should be evaluated")
    ev.add_argument("--policy", choices=("greedy", "optimized"), default="greedy")

    op = sub.add_parser("optimize", help="layout and/or control optimization")
    _common(op)
    op.add_argument("--mode", choices=MODES, default="dbhm")
    op.add_argument("--pso-iterations", type=int, default=None)
    op.add_argument("--pso-restarts", type=int, default=None)
    op.add_argument("--swarm-size", type=int, default=None)
    op.add_argument("--max-iter", type=int, default=None, help="cap on consensus iterations")

    ff = sub.add_parser("flowfield", help="export a velocity grid for plotting")
    _common(ff)
    ff.add_argument("--plan", help="report JSON supplying controls (default greedy)")
    ff.add_argument("--scenario", type=int, default=None, help="scenario index; omit for weighted")
    ff.add_argument("--grid-res", type=float, default=20.0, help="grid spacing in metres")
    ff.add_argument("--margin", type=float, default=500.0, help="extent beyond the site, metres")

    sw = sub.add_parser("sweep", help="AEP versus the position of one turbine")
    _common(sw)
    sw.add_argument("--turbine", type=int, default=1)
    sw.add_argument("--axis", choices=("x", "y"), default="x")
    sw.add_argument("--start", type=float, required=True)
    sw.add_argument("--stop", type=float, required=True)
    sw.add_argument("--step", type=float, default=10.0)
    sw.add_argument("--optimized-policy", choices=("grid", "solver"), default="grid")
    return parser


# -- shared loading -----------------------------------------------------------


def _load_inputs(args):
    config = load_config(resolve(args.config))
    rose = load_wind_rose(resolve(args.rose), speed=config.speed)
    if args.scenarios is not None:
        if args.scenarios < 1:
            raise CliError("--scenarios must be >= 1")
        rose = discretize_rose(rose, args.scenarios)
    if args.threads < 1:
        raise CliError("--threads must be >= 1")
    layout = load_layout(resolve(args.layout)) if args.layout else None
    solver = config.solver
    ctrl = ControlSolveOptions(**solver.get("control", {}))
    if args.fix_alpha:
        ctrl = replace(ctrl, fix_alpha_at_greedy=True)
    problem = LayoutProblem(
        spec=config.spec, rose=rose, hours_per_year=config.hours_per_year,
        penalty_factor=config.penalty_factor, movable=config.movable,
        control_options=ctrl, threads=args.threads,
    )
    if layout is not None:
        problem.free_mask(len(layout))
    return config, problem, layout


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plan_from(args, problem, layout) -> ControlPlan:
    if not getattr(args, "plan", None):
        return ControlPlan.greedy(problem.rose.n_scenarios, len(layout))
    report = load_report(resolve(args.plan))
    plan = report.plan
    if plan.n_scenarios != problem.rose.n_scenarios or plan.n_turbines != len(layout):
        raise CliError(f"{args.plan}: plan shape {plan.yaw_deg.shape} does not match "
                       f"{problem.rose.n_scenarios} scenarios x {len(layout)} turbines")
    return plan


def _write_outputs(out: Path, report, elapsed: float):
    save_report(out / "report.json", report)
    save_layout(out / "layout.csv", report.layout)
    # wall-clock time lives apart from the report so reports stay reproducible
    (out / "timing.json").write_text(json.dumps({"wall_clock_seconds": elapsed}, indent=2) + "\n")


def _write_trace_csv(path: Path, traces: dict):
    rows = []
    for k, entry in enumerate(traces.get("pso", [])):
        rows.append({"stage": "pso", "step": k, "restart": entry["restart"],
                     "objective": entry["best_objective"], "residual_m": "", "proxy_aep_gwh": ""})
    for k, r in enumerate(traces.get("residual", [])):
        rows.append({"stage": "dbhm", "step": k + 1, "restart": "", "objective": "",
                     "residual_m": repr(float(r)),
                     "proxy_aep_gwh": repr(float(traces["proxy_aep_gwh"][k]))})
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, ["stage", "step", "restart", "objective", "residual_m",
                                     "proxy_aep_gwh"])
        writer.writeheader()
        writer.writerows(rows)


def _print_summary(report):
    print(f"AEP: {report.aep_gwh:.6f} GWh")
    for k, p in enumerate(report.scenario_power_mw):
        print(f"  scenario {k:3d}: {p:.6f} MW")


# -- commands -----------------------------------------------------------------


def cmd_evaluate(args) -> int:
    _, problem, layout = _load_inputs(args)
    t0 = time.perf_counter()
    if args.policy == "optimized" and not args.plan:
        report = control_only(problem, layout, seed=args.seed)
        report.metadata["mode"] = "evaluate"
    else:
        plan = _plan_from(args, problem, layout)
        report = build_report(layout, plan, problem, mode="evaluate", extra={"seed": args.seed})
    report.wall_clock_seconds = None
    _print_summary(report)
    _write_outputs(_out_dir(args), report, time.perf_counter() - t0)
    return 0


def cmd_optimize(args) -> int:
    from .dbhm import DbhmOptions, dbhm_pipeline

    config, problem, layout = _load_inputs(args)
    solver = config.solver
    pso = PsoOptions(**solver.get("pso", {}))
    overrides = {k: v for k, v in (("iterations", args.pso_iterations),
                                   ("restarts", args.pso_restarts),
                                   ("swarm_size", args.swarm_size)) if v is not None}
    pso = replace(pso, **overrides)
    dbhm = DbhmOptions(**solver.get("dbhm", {}))
    if args.max_iter is not None:
        dbhm = replace(dbhm, max_iterations=args.max_iter)
    if args.fix_alpha:
        dbhm = replace(dbhm, fix_alpha=True)

    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.mode == "control-only":
            report = control_only(problem, layout, seed=args.seed)
        elif args.mode == "pso":
            report = layout_only(problem, layout, seed=args.seed, pso_options=pso)
        elif args.mode == "sequential":
            report = sequential_optimize(problem, layout, seed=args.seed, pso_options=pso)
        else:
            report = dbhm_pipeline(problem, layout, seed=args.seed, pso_options=pso, options=dbhm)
    elapsed = time.perf_counter() - t0
    notes = sorted({str(w.message) for w in caught})
    report.metadata["warnings"] = sorted(set(report.metadata.get("warnings", [])) | set(notes))
    report.metadata["config"] = config.raw
    report.wall_clock_seconds = None
    for note in report.metadata["warnings"]:
        print(f"warning: {note}", file=sys.stderr)
    _print_summary(report)
    out = _out_dir(args)
    _write_outputs(out, report, elapsed)
    _write_trace_csv(out / "trace.csv", report.traces)
    return 0


def cmd_flowfield(args) -> int:
    _, problem, layout = _load_inputs(args)
    if not args.grid_res > 0:
        raise CliError("--grid-res must be positive")
    plan = _plan_from(args, problem, layout)
    rose, spec = problem.rose, problem.spec
    (xl, xu), (yl, yu) = spec.site_bounds
    gx = np.arange(xl - args.margin, xu + args.margin + 1e-9, args.grid_res)
    gy = np.arange(yl - args.margin, yu + args.margin + 1e-9, args.grid_res)
    px, py = np.meshgrid(gx, gy, indexing="xy")
    if args.scenario is not None:
        if not 0 <= args.scenario < rose.n_scenarios:
            raise CliError(f"--scenario must lie in [0, {rose.n_scenarios})")
        scenarios, weights = [args.scenario], [1.0]
    else:
        scenarios, weights = range(rose.n_scenarios), rose.probabilities
    field = np.zeros_like(px)
    for w, p in zip(scenarios, weights):
        inflow = Inflow(rose.directions_deg[w], rose.speed)
        field += p * velocity_field(px, py, layout, plan.controls(w), inflow, spec)
    out = _out_dir(args)
    with (out / "flowfield.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_m", "y_m", "velocity_mps"])
        for a, b, v in zip(px.ravel(), py.ravel(), field.ravel()):
            writer.writerow([repr(float(a)), repr(float(b)), repr(float(v))])
    print(f"wrote {px.size} grid points to {out / 'flowfield.csv'}")
    return 0


def cmd_sweep(args) -> int:
    from .oracle import sweep_position, write_sweep_csv

    _, problem, layout = _load_inputs(args)
    if not 0 <= args.turbine < len(layout):
        raise CliError(f"--turbine must lie in [0, {len(layout)})")
    if not args.step > 0 or args.stop < args.start:
        raise CliError("need --step > 0 and --stop >= --start")
    grid = np.arange(args.start, args.stop + 1e-9, args.step)
    greedy = sweep_position(layout, args.turbine, args.axis, grid, problem, "greedy")
    optimized = sweep_position(layout, args.turbine, args.axis, grid, problem, args.optimized_policy)
    out = _out_dir(args)
    write_sweep_csv(out / "sweep.csv", grid, {"greedy": greedy.aep_mwh, "optimized": optimized.aep_mwh})
    print(f"greedy argmax: {greedy.argmax:.1f} m ({greedy.aep_mwh.max():.1f} MWh)")
    print(f"optimized argmax: {optimized.argmax:.1f} m ({optimized.aep_mwh.max():.1f} MWh)")
    return 0


COMMANDS = {"evaluate": cmd_evaluate, "optimize": cmd_optimize, "flowfield": cmd_flowfield,
            "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (WakeDomainError, FloatingPointError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (CliError, FileNotFoundError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
