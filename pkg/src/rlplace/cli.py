"""Command line entry point: ``rlplace {gen-trace,solve,simulate,report}``."""

from __future__ import annotations

import argparse
import csv
from dataclasses import asdict
import io
import logging
from pathlib import Path
import sys

from . import config as scenario_config
from .domain import ScenarioConfig, ScenarioError
from .metrics import (
    ARMS,
    MetricsError,
    TrialSummary,
    atomic_write,
    average_summaries,
    compare_report,
    read_ticks_csv,
    summarize,
    summary_csv,
    ticks_csv,
)
from .optimizer import Infeasible, ObjectiveKind, PlacementError, brute_force_solve, solve
from .problem_file import ProblemFormatError, load_problem
from .sim import PolicyKind, SimulationError, run_trials
from .traces import TraceError, emit_csv, generate_synthetic, parse_csv_trace, parse_fcd

log = logging.getLogger("rlplace")

DOMAIN_ERRORS = (
    Infeasible, PlacementError, ProblemFormatError, ScenarioError, scenario_config.ConfigError,
    TraceError, SimulationError, MetricsError, OSError,
)

POLICIES = {"static": PolicyKind.STATIC, "rl": PolicyKind.RL_DYNAMIC}
OBJECTIVES = {"delay": ObjectiveKind.D_OPT, "su": ObjectiveKind.SU_OPT}


def _defaults_epilog() -> str:
    cfg = scenario_config.default_config()
    return (
        "scenario defaults (override with --config FILE):\n"
        f"  services={cfg.n_services} vehicles={cfg.vehicle_count} edges={cfg.n_edges}\n"
        f"  R_s={[s.resource_demand for s in cfg.services]}\n"
        f"  C_i={[e.capacity for e in cfg.edges]}\n"
        f"  D_s(ms)={[s.delay_threshold for s in cfg.services]}\n"
        f"  N_i={cfg.edges[0].ue_limit} alpha={cfg.learning_rate} beta={cfg.balance_offset} "
        f"gamma={cfg.discount} t=1..{cfg.horizon:g}s penalty={cfg.violation_penalty:g}\n"
        f"  delay: {asdict(cfg.delay)}\n"
        f"  mobility: {asdict(cfg.mobility)}"
    )


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="rlplace",
        description="Dynamic service placement on vehicular edge servers.",
        epilog=_defaults_epilog(),
        formatter_class=lambda prog: argparse.RawDescriptionHelpFormatter(prog, width=100),
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trace", help="write a seeded synthetic CSV trace", formatter_class=fmt)
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--config", type=Path, default=None, help="scenario YAML (area, speeds, vehicles, horizon)")
    p.add_argument("--vehicles", type=int, default=None, help="vehicle count (default: scenario's, 100)")
    p.add_argument("--horizon", type=float, default=None, help="seconds (default: scenario's, 500)")
    p.add_argument("--tick", type=float, default=None, help="sampling period in seconds (default: 1)")
    p.add_argument("--out", type=Path, default=None, help="output CSV path (stdout if omitted)")

    p = sub.add_parser("solve", help="solve one placement snapshot", formatter_class=fmt)
    p.add_argument("--problem", type=Path, required=True, help="problem YAML file")
    p.add_argument("--objective", choices=sorted(OBJECTIVES), default=None,
                   help="override the file's objective (file default: delay)")
    p.add_argument("--brute-force", action="store_true", help="use exhaustive enumeration")

    p = sub.add_parser("simulate", help="run seeded trials of one policy/objective arm", formatter_class=fmt)
    p.add_argument("--policy", choices=sorted(POLICIES), default="rl", help="placement policy")
    p.add_argument("--objective", choices=sorted(OBJECTIVES), default="delay", help="optimizer objective")
    p.add_argument("--trace", default="synthetic", help="synthetic | fcd:PATH | csv:PATH")
    p.add_argument("--seed", type=int, default=0, help="base seed; trial k uses seed+k")
    p.add_argument("--trials", type=int, default=5, help="number of trials")
    p.add_argument("--config", type=Path, default=None, help="scenario YAML overriding the defaults")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--reproduce", action="store_true",
                   help="run all four policy x objective arms and write the comparison tables")

    p = sub.add_parser("report", help="build comparison tables from simulate outputs", formatter_class=fmt)
    p.add_argument("--in", dest="inputs", type=Path, nargs="+", required=True,
                   help="simulate output directories (searched recursively)")
    p.add_argument("--out", type=Path, required=True, help="directory for fairness/utilization tables and delay series")
    return parser


def _load_config(path: Path | None) -> ScenarioConfig:
    return scenario_config.default_config() if path is None else scenario_config.load(path)


def cmd_gen_trace(args) -> int:
    cfg = _load_config(args.config)
    samples = generate_synthetic(
        cfg.mobility.area,
        args.vehicles if args.vehicles is not None else cfg.vehicle_count,
        args.horizon if args.horizon is not None else cfg.horizon,
        args.tick if args.tick is not None else cfg.monitor_interval,
        cfg.mobility.speed_range,
        args.seed,
    )
    text = emit_csv(samples)
    if args.out is None:
        sys.stdout.write(text)
    else:
        atomic_write(args.out, text)
    return 0


def _print_solution(sol, stream) -> None:
    print(f"feasible: {str(sol.feasible).lower()}", file=stream)
    print(f"objective: {sol.objective_value!r}", file=stream)
    if sol.placement is not None:
        for s, host in enumerate(sol.placement.hosts):
            delay = sol.service_delays[s]
            print(f"service {s} -> edge {host}  avg_delay_ms={'' if delay is None else f'{delay:.6f}'}", file=stream)
    print(f"report: {sol.report.summary()}", file=stream)


def cmd_solve(args) -> int:
    objective = OBJECTIVES[args.objective] if args.objective else None
    _, problem = load_problem(args.problem, objective)
    solver = brute_force_solve if args.brute_force else solve
    try:
        sol = solver(problem)
    except Infeasible as exc:
        _print_solution(exc.solution, sys.stdout)
        raise
    _print_solution(sol, sys.stdout)
    return 0


def _trace_source(spec: str):
    if spec == "synthetic":
        return None
    kind, _, path = spec.partition(":")
    if kind == "fcd" and path:
        return parse_fcd(path)
    if kind == "csv" and path:
        return parse_csv_trace(path)
    raise ValueError(f"--trace must be synthetic, fcd:PATH or csv:PATH, got {spec!r}")


def _write_arm(out: Path, results) -> None:
    for k, records in enumerate(results.ticks, start=1):
        atomic_write(out / f"ticks_{k}.csv", ticks_csv(records))
    atomic_write(out / "summary.csv", summary_csv([*results.summaries, results.average]))


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.trials < 1:
        raise ValueError("--trials must be >= 1")
    trace = _trace_source(args.trace)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "scenario.yaml", scenario_config.dumps(cfg))
    if not args.reproduce:
        policy, objective = POLICIES[args.policy], OBJECTIVES[args.objective]
        results = run_trials(cfg, policy, objective, args.trials, args.seed, trace)
        _write_arm(out, results)
        log.info("wrote %d trials to %s", args.trials, out)
        return 0

    summaries, ticks = {}, {}
    for policy_name, objective_name in ARMS:
        arm_dir = out / f"{policy_name}_{objective_name}"
        results = run_trials(cfg, POLICIES[policy_name], OBJECTIVES[objective_name], args.trials, args.seed, trace)
        atomic_write(arm_dir / "scenario.yaml", scenario_config.dumps(cfg))
        _write_arm(arm_dir, results)
        summaries[(policy_name, objective_name)] = results.summaries
        ticks[(policy_name, objective_name)] = results.ticks
    rows = [x for arm in ARMS for x in (*summaries[arm], average_summaries(summaries[arm]))]
    atomic_write(out / "summary.csv", summary_csv(rows))
    compare_report(summaries, ticks, out, require=ARMS)
    return 0


def _discover(inputs) -> dict[tuple[str, str], tuple[list[TrialSummary], list]]:
    found: dict[tuple[str, str], tuple[list, list]] = {}
    dirs = []
    for root in inputs:
        if not root.is_dir():
            raise FileNotFoundError(f"{root} is not a directory")
        dirs += sorted({p.parent for p in root.rglob("ticks_*.csv")})
    for d in dirs:
        cfg = scenario_config.load(d / "scenario.yaml")
        with open(d / "summary.csv", newline="", encoding="utf-8") as fh:
            arm_rows = [r for r in csv.DictReader(fh) if r["trial"] != "mean"]
        arms = {(r["policy"], r["objective"]) for r in arm_rows}
        if len(arms) != 1:
            continue  # a combined repro summary; its arms live in subdirectories
        arm = arms.pop()
        files = sorted(d.glob("ticks_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
        tick_lists = [read_ticks_csv(f, cfg) for f in files]
        sums = [summarize(t, cfg, arm[0], arm[1], k) for k, t in enumerate(tick_lists, start=1)]
        found[arm] = (sums, tick_lists)
    return found


def cmd_report(args) -> int:
    found = _discover(args.inputs)
    summaries = {arm: v[0] for arm, v in found.items()}
    ticks = {arm: v[1] for arm, v in found.items()}
    result = compare_report(summaries, ticks, args.out)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["table", "trial", *(f"{p}_{o}" for p, o in ARMS)])
    for name, rows in (("fairness", result.fairness), ("utilization", result.utilization)):
        for row in rows:
            writer.writerow([name, *("" if v is None else (f"{v:.4f}" if isinstance(v, float) else v) for v in row)])
    sys.stdout.write(buf.getvalue())
    return 0


COMMANDS = {"gen-trace": cmd_gen_trace, "solve": cmd_solve, "simulate": cmd_simulate, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DOMAIN_ERRORS + (ValueError,) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
