"""
Command line: run scenarios, verify strategies, check (lambda, epsilon, eta) and export traces.

Exit codes: 0 success, 1 violations / unverified / verdict false, 2 usage or config errors.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.core.config import settings
from app.core.exceptions import (
    ADSError,
    DimensionMismatchError,
    NoStartVertexError,
    ParameterError,
    ScenarioConfigError,
)
from app.services.scenarios.engine import lee_for_scenario, predict_scenario, run_scenario, verify_scenario
from app.services.scenarios.loader import load_scenario
from app.services.trace import TraceHeader, export_csv, read_trace, state_audit, write_trace
from app.services.verifier import export_graph

logger = logging.getLogger("adsim")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

USAGE_ERRORS = (ScenarioConfigError, ParameterError, NoStartVertexError, DimensionMismatchError)


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adsim", description="Analogue-digital mode simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="Enable debug logging")
    p.add_argument("-q", "--quiet", action="store_true", help="Only log errors")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a scenario and write its trace")
    run.add_argument("scenario", help=f"Scenario file or name in {settings.SCENARIO_DIR}")
    run.add_argument("--seed", type=int, default=None, help="Master seed (default: the scenario's)")
    run.add_argument("--horizon", type=float, default=None, help="Simulated seconds")
    run.add_argument("--x0", type=float, nargs="+", default=None, help="Override the initial state")
    run.add_argument("--sweep", type=int, default=1, help="Run this many consecutive seeds")
    run.add_argument("--trace", type=str, default=None, help="Trace file (JSON lines); {seed} is substituted")
    run.add_argument("--report", type=str, default=None, help="Write the run report(s) as JSON")

    verify = sub.add_parser("verify", help="Build and verify the strategy graph")
    verify.add_argument("scenario")
    verify.add_argument("--grid-density", type=float, default=None, help="Sampling grid spacing")
    verify.add_argument("--dense", action="store_true", help="Uniform grid on every axis")
    verify.add_argument("--agent", type=str, default=None, help="Agent whose strategy to verify")
    verify.add_argument("--report", type=str, default=None, help="Write the verification report as JSON")
    verify.add_argument("--graph", type=str, default=None, help="Write the strategy graph (.graphml or .json)")

    lee = sub.add_parser("lee", help="Empirical (lambda, epsilon, eta) check")
    lee.add_argument("scenario")
    lee.add_argument("--mode", type=str, default=None, help="Sample anchors in this mode's chart")
    lee.add_argument("--lambda", dest="lam", type=float, default=None)
    lee.add_argument("--epsilon", type=float, default=None)
    lee.add_argument("--eta", type=float, default=None)
    lee.add_argument("--samples", type=int, default=None)
    lee.add_argument("--seed", type=int, default=None)

    predict = sub.add_parser("predict", help="measure-predict with fixed parameters; writes segment events")
    predict.add_argument("scenario")
    predict.add_argument("--steps", type=int, required=True)
    predict.add_argument("--seed", type=int, default=None)
    predict.add_argument("--trace", type=str, default=None)

    export = sub.add_parser("trace-export", help="Export a trace's measurements as CSV")
    export.add_argument("trace")
    export.add_argument("--out", type=str, required=True)
    return p


def _setup_logging(args):
    if args.quiet:
        level = logging.ERROR
    elif args.verbose:
        level = logging.DEBUG
    else:
        level = settings.LOG_LEVEL
    logging.basicConfig(level=level, format=settings.LOG_FORMAT, stream=sys.stderr)


def _print(data):
    print(json.dumps(data, indent=2, default=str))


def cmd_run(args) -> int:
    spec = load_scenario(args.scenario)
    for warning in spec.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    first = spec.default_seed if args.seed is None else args.seed
    reports = []
    for seed in range(first, first + max(1, args.sweep)):
        report = run_scenario(spec, seed=seed, horizon=args.horizon, x0=args.x0)
        reports.append(report)
        if args.trace:
            write_trace(args.trace.format(seed=seed), report.header, report.events)
        orphans = state_audit(report.events)
        if orphans:
            logger.error(f"seed {seed}: {len(orphans)} state changes without a measurement or transfer")
    summary = [r.model_dump(mode="json") for r in reports]
    if args.report:
        Path(args.report).write_text(json.dumps(summary if len(summary) > 1 else summary[0], indent=2))
    _print(
        [
            {
                "run_id": r.run_id,
                "seed": r.seed,
                "ok": r.ok,
                "sim_time": r.sim_time,
                "violations": r.violation_count,
                "errors": len(r.errors),
                "finished": {name: a.reached_end for name, a in r.agents.items()},
            }
            for r in reports
        ]
    )
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FAILED


def cmd_verify(args) -> int:
    spec = load_scenario(args.scenario)
    outcome = verify_scenario(spec, agent=args.agent, grid_density=args.grid_density, dense=args.dense or None)
    report = outcome.report.model_dump(mode="json")
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2))
    if args.graph:
        export_graph(outcome.graph, args.graph)
    _print({k: report[k] for k in ("scenario", "agent", "verified", "kind", "counterexample", "vertices_visited")})
    return EXIT_OK if outcome.result.verified else EXIT_FAILED


def cmd_lee(args) -> int:
    spec = load_scenario(args.scenario)
    report = lee_for_scenario(
        spec, mode=args.mode, lam=args.lam, epsilon=args.epsilon, eta=args.eta, samples=args.samples, seed=args.seed
    )
    _print(report.as_dict())
    return EXIT_OK if report.verdict else EXIT_FAILED


def cmd_predict(args) -> int:
    spec = load_scenario(args.scenario)
    path, recorder = predict_scenario(spec, args.steps, seed=args.seed)
    if args.trace:
        seed = spec.default_seed if args.seed is None else args.seed
        header = TraceHeader(run_id=recorder.run_id, scenario=spec.name, seed=seed, axes=list(spec.axes))
        write_trace(args.trace, header, recorder.events)
    _print({"segments": len(path.segments), "start": path.start_time, "end": path.end_time})
    return EXIT_OK


def cmd_trace_export(args) -> int:
    header, events = read_trace(args.trace)
    rows = export_csv(args.out, header, events)
    _print({"rows": rows, "out": args.out})
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "verify": cmd_verify,
    "lee": cmd_lee,
    "predict": cmd_predict,
    "trace-export": cmd_trace_export,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _setup_logging(args)
    try:
        return COMMANDS[args.command](args)
    except USAGE_ERRORS as e:
        print(f"error: {e.message}", file=sys.stderr)
        for problem in getattr(e, "problems", []):
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_USAGE
    except ADSError as e:
        logger.error(e.message)
        return EXIT_FAILED
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
