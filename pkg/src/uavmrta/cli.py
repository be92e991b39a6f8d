"""Command-line entry point: plan, validate, simulate, export-milp, report, oracle."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from collections import Counter
from pathlib import Path

from .allocation import dump_solution, evaluate, route_of, solution_from_dict
from .correlation import correlation_report, fmt_rho, write_correlation_csv, write_figure_series
from .ga import GaParams, UncoverableTaskError, run_ga
from .grid import mission_cost_tensor
from .mesh import MeshConfig
from .milp import export_milp
from .mission import MINMAX, MINSUM, MissionFormatError, MissionSpec, load_mission, validate_mission
from .oracle import InfeasibleError, InstanceTooLargeError, OracleTimeout, solve_exact
from .sim import SimConfig, SimulationAbort, read_telemetry_csv, run_mission, write_telemetry_csv
from .twoopt import refine

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_ABORT = 0, 1, 2, 3


class InputError(Exception):
    pass


def _fmt_cost(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:g}"


def _load(args) -> MissionSpec:
    try:
        spec = load_mission(args.mission)
    except FileNotFoundError as exc:
        raise InputError(f"mission file not found: {args.mission}") from exc
    except MissionFormatError as exc:
        raise InputError(str(exc)) from exc
    if getattr(args, "objective", None):
        spec = spec.with_objective(args.objective)
    return spec


def _load_valid(args) -> MissionSpec:
    spec = _load(args)
    problems = validate_mission(spec)
    if problems:
        raise InputError("invalid mission:\n  " + "\n  ".join(problems))
    return spec


def _load_solution(args, spec: MissionSpec):
    if not args.solution:
        raise InputError("--solution is required")
    try:
        doc = json.loads(Path(args.solution).read_text())
        sol = solution_from_dict(doc)
    except FileNotFoundError as exc:
        raise InputError(f"solution file not found: {args.solution}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"malformed solution file: {exc}") from exc
    if Counter(g.task for g in sol.genes) != Counter(spec.tasks):
        raise InputError("solution does not match mission: task sets differ")
    return sol, doc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_summary(spec, sol, tensor, objective):
    rep = evaluate(sol, spec, tensor)
    print(f"objective: {objective}")
    print(f"C1 (sum) = {_fmt_cost(rep.c1)}  C2 (max) = {_fmt_cost(rep.c2)}  feasible = {rep.feasible}")
    for r in sorted(spec.robots, key=lambda r: r.id):
        if not sol.genes_of(r.id):
            print(f"  robot {r.id}: unused")
            continue
        seq, cost = route_of(sol, r.id, tensor, spec.depot.id)
        print(f"  robot {r.id}: {' -> '.join(f'a{s}' for s in seq)}  cost {_fmt_cost(cost)}")
    for v in rep.violations:
        print(f"  violation {v.kind}: {v.detail}")
    return rep


# --- subcommands ----------------------------------------------------------------

def cmd_validate(args) -> int:
    spec = _load(args)
    problems = validate_mission(spec)
    if problems:
        for p in problems:
            print(p)
        return EXIT_INPUT
    print("OK")
    return EXIT_OK


def cmd_plan(args) -> int:
    spec = _load_valid(args)
    tensor = mission_cost_tensor(spec)
    params = GaParams.from_mapping(spec.settings.get("ga"), seed=args.seed,
                                   generations=args.generations, population=args.population)
    try:
        result = run_ga(spec, tensor, params)
    except UncoverableTaskError as exc:
        raise InputError(str(exc)) from exc
    sol, report = refine(result.best, spec, tensor)
    out = _out_dir(args)
    dump_solution(sol, spec, tensor, out / "solution.json", spec.objective)
    with open(out / "history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "best_fitness"])
        for g, f in enumerate(result.history):
            w.writerow([g, f"{f:.6f}"])
    with open(out / "two_opt.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["robot", "cost_before", "cost_after", "passes", "reversals"])
        for row in report.rows():
            w.writerow([row[0], _fmt_cost(row[1]), _fmt_cost(row[2]), row[3], row[4]])
    rep = _print_summary(spec, sol, tensor, spec.objective)
    print(f"wrote {out / 'solution.json'}")
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def _sim_objective(args, spec, doc) -> str:
    if args.objective:
        return args.objective
    return doc.get("objective", spec.objective)


def _simulate(args, spec, sol, out: Path):
    tensor = mission_cost_tensor(spec)
    config = SimConfig.from_mapping(spec.settings.get("sim"), dt=args.dt)
    mesh = MeshConfig.from_env(transport=args.transport, period_ms=config.beacon_period_ms)
    try:
        return run_mission(spec, sol, tensor, config, mesh=mesh)
    except SimulationAbort as exc:
        path = out / "abort_dump.json"
        path.write_text(json.dumps(exc.dump, indent=2) + "\n")
        print(f"simulation aborted: {exc} (state dump in {path})", file=sys.stderr)
        raise


def cmd_simulate(args) -> int:
    spec = _load_valid(args)
    sol, doc = _load_solution(args, spec)
    out = _out_dir(args)
    try:
        result = _simulate(args, spec, sol, out)
    except SimulationAbort:
        return EXIT_ABORT
    objective = _sim_objective(args, spec, doc)
    write_telemetry_csv(result.telemetry, out / "telemetry.csv")
    rep = correlation_report(result.telemetry, objective)
    write_correlation_csv(rep, out / "correlation.csv")
    for r in result.robots:
        if r.flew:
            note = "  BUDGET BREACH IN SIMULATION" if r.budget_breach else ""
            print(f"robot {r.robot}: planned cost {_fmt_cost(r.planned_cost)}, flight {r.flight_time_s:.2f} s, "
                  f"energy {r.energy:.3f}, battery {r.battery_pct:.1f}%{note}")
    print(f"pooled rho = {fmt_rho(rep.pooled)}")
    return EXIT_OK


def cmd_report(args) -> int:
    spec = _load_valid(args)
    out = _out_dir(args)
    if args.telemetry:
        telemetry = read_telemetry_csv(args.telemetry)
        objective = args.objective or spec.objective
    else:
        sol, doc = _load_solution(args, spec)
        try:
            telemetry = _simulate(args, spec, sol, out).telemetry
        except SimulationAbort:
            return EXIT_ABORT
        objective = _sim_objective(args, spec, doc)
    for path in write_figure_series(telemetry, out):
        print(f"wrote {path}")
    rep = correlation_report(telemetry, objective)
    write_correlation_csv(rep, out / "correlation.csv")
    print(rep.summary())
    return EXIT_OK


def cmd_export_milp(args) -> int:
    spec = _load_valid(args)
    text = export_milp(spec, mission_cost_tensor(spec))
    out = Path(args.out)
    if out.suffix != ".lp":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "mission.lp"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    spec = _load_valid(args)
    tensor = mission_cost_tensor(spec)
    try:
        best, value = solve_exact(spec, tensor)
    except InstanceTooLargeError as exc:
        raise InputError(str(exc)) from exc
    except (InfeasibleError, OracleTimeout) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INFEASIBLE
    _print_summary(spec, best, tensor, spec.objective)
    print(f"optimum = {_fmt_cost(value)}")
    if args.solution:
        sol, _ = _load_solution(args, spec)
        got = evaluate(sol, spec, tensor).objective(spec.objective)
        gap = 0.0 if got == value else (math.inf if value == 0 else 100.0 * (got - value) / value)
        print(f"solution = {_fmt_cost(got)}  gap = {gap:.3f}%")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavmrta", description="Multi-UAV task allocation, planning and simulation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--mission", required=True, help="mission JSON file")
        sp.add_argument("--objective", choices=(MINSUM, MINMAX), default=None)
        sp.set_defaults(func=fn)
        return sp

    add("validate", cmd_validate, "check a mission file")

    sp = add("plan", cmd_plan, "GA + 2-Opt planning")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--generations", type=int, default=None)
    sp.add_argument("--population", type=int, default=None)
    sp.add_argument("--out", default="out")

    for name, fn, help_ in (("simulate", cmd_simulate, "fly a planned solution"),
                            ("report", cmd_report, "figure series (CSV) from telemetry or a fresh run")):
        sp = add(name, fn, help_)
        sp.add_argument("--solution", default=None)
        sp.add_argument("--out", default="out")
        sp.add_argument("--transport", choices=("loopback", "udp"), default="loopback")
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--seed", type=int, default=0)
        if name == "report":
            sp.add_argument("--telemetry", default=None, help="existing telemetry CSV")

    sp = add("export-milp", cmd_export_milp, "write the MILP model in LP format")
    sp.add_argument("--out", default="out")

    sp = add("oracle", cmd_oracle, "exact optimum of a small instance")
    sp.add_argument("--solution", default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
