#!/usr/bin/env python3
"""
CLI: generate instances, solve them, check schedules, run benchmarks.

Usage:
    # Generate a random concurrent open-shop instance
    python -m cli.flowsched gen --kind random-cossp --seed 3 --n 5 --m 2 --out inst.json

    # Solve it and write the instance + schedule document
    python -m cli.flowsched solve-cossp --in inst.json --out sol.json --report rep.json

    # Solve a precedence-constrained instance
    python -m cli.flowsched solve-pcsp --in dag.json --out sol.json --alpha 3

    # Validate a solution document (exit 1 on violations)
    python -m cli.flowsched check --in sol.json

    # Exact optimum of a tiny instance
    python -m cli.flowsched oracle --in inst.json

    # Benchmark a named suite
    python -m cli.flowsched bench --suite tiny --out report.csv
"""
from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence

# Allow running from project root
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pydantic import ValidationError

from flowsched.config import Settings, get_settings
from flowsched.exceptions import FlowschedError
from flowsched.models import CosspInstance
from flowsched.schemas import (
    InstancePayload,
    OracleReport,
    ScheduleDocument,
    SolutionDocument,
    SolveReport,
    fmt_rational,
)
from flowsched.services import bench as bench_service
from flowsched.services import gen, oracle
from flowsched.services.cossp import solve_cossp
from flowsched.services.pcsp import solve_pcsp
from flowsched.services.validation import validate_cossp_schedule, validate_pcsp_schedule

logger = logging.getLogger("flowsched.cli")

GEN_KINDS = ("random-cossp", "random-pcsp", "dks", "makespan-gap")


def _num(value: Any) -> str:
    if isinstance(value, (int, Fraction)):
        return fmt_rational(value)
    return f"{float(value):.6f}"


def _read_json(path: str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _emit(doc: Any, out: Optional[str]) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _settings(args: argparse.Namespace) -> Settings:
    update = {}
    if getattr(args, "seed", None) is not None:
        update["seed"] = args.seed
    if getattr(args, "mode", None):
        update["lp_mode"] = args.mode
    if getattr(args, "max_rounds", None) is not None:
        update["lp_max_iterations"] = args.max_rounds
    if getattr(args, "alpha", None) is not None:
        update["pcsp_alpha"] = args.alpha
    if getattr(args, "cover", None):
        update["cover_solver"] = args.cover
    if getattr(args, "timings", None) is not None:
        update["bench_timings"] = args.timings
    base = get_settings()
    return base.model_copy(update=update) if update else base


# ── Subcommands ──────────────────────────────────────────────────────────────

def cmd_gen(args: argparse.Namespace) -> int:
    settings = _settings(args)
    seed = settings.seed
    if args.kind == "random-cossp":
        instance = gen.random_cossp(seed, args.n, args.m, args.pmax, args.cost_kind)
        scale = 1
    elif args.kind == "random-pcsp":
        instance = gen.random_pcsp(seed, args.n, args.m, args.pmax, args.edge_prob)
        scale = 1
    elif args.kind == "dks":
        graph = gen.planted_dks_graph(seed, args.n, args.k, args.edge_prob,
                                      T=args.T, delta_inv=args.delta_inv)
        generated = gen.dks_reduction(graph)
        instance, scale = generated.instance, generated.scale
    else:
        base = gen.random_pcsp(seed, args.n, args.m, 1, args.edge_prob)
        generated = gen.makespan_gap_instance(base, args.gamma, args.epsilon,
                                              Fraction(args.delta))
        instance, scale = generated.instance, generated.scale
    doc = InstancePayload.from_domain(instance).to_json_dict()
    if scale != 1:
        logger.info("sizes and releases scaled by %d", scale)
    _emit(doc, args.out)
    return 0


def cmd_solve_cossp(args: argparse.Namespace) -> int:
    settings = _settings(args)
    instance = InstancePayload(**_read_json(args.input)).to_domain()
    if not isinstance(instance, CosspInstance):
        print("ERROR: solve-cossp needs a cossp instance", file=sys.stderr)
        return 1
    res = solve_cossp(instance, settings=settings)
    solution = SolutionDocument(instance=InstancePayload.from_domain(instance),
                                schedule=ScheduleDocument.from_cossp(res.schedule))
    _emit(_solution_json(solution), args.out)
    if args.report:
        report = SolveReport(
            solver="cossp", n=instance.n, m=instance.m, P=_num(instance.P),
            cost=_num(res.cost), lp_objective=_num(res.lp_objective),
            lp_bound=_num(res.lp_bound), ratio=res.ratio, rounds=res.rounds,
            details={"deadlines": list(res.deadlines), **res.stats},
        )
        _emit(report.model_dump(mode="json"), args.report)
    return 0


def cmd_solve_pcsp(args: argparse.Namespace) -> int:
    settings = _settings(args)
    instance = InstancePayload(**_read_json(args.input)).to_domain()
    if isinstance(instance, CosspInstance):
        print("ERROR: solve-pcsp needs a pcsp instance", file=sys.stderr)
        return 1
    horizon = None if args.horizon.upper() == "AUTO" else int(args.horizon)
    res = solve_pcsp(instance, alpha=settings.pcsp_alpha, expand=args.expand_chains,
                     horizon=horizon, settings=settings)
    solution = SolutionDocument(instance=InstancePayload.from_domain(res.instance),
                                schedule=ScheduleDocument.from_migratory(res.schedule, res.instance.m))
    _emit(_solution_json(solution), args.out)
    if args.report:
        ratio = float(Fraction(res.cost) / Fraction(res.lp_bound)) if res.lp_bound > 0 else None
        report = SolveReport(
            solver="pcsp", n=res.instance.n, m=res.instance.m, P=_num(res.instance.P),
            cost=_num(res.cost), lp_objective=_num(res.lp_objective),
            lp_bound=_num(res.lp_bound), ratio=ratio, speed=_num(res.speed),
            details={"factor": _num(res.factor), **res.stats},
        )
        _emit(report.model_dump(mode="json"), args.report)
    return 0


def _solution_json(solution: SolutionDocument) -> dict:
    return {
        "instance": solution.instance.to_json_dict(),
        "schedule": solution.schedule.model_dump(mode="json"),
    }


def cmd_check(args: argparse.Namespace) -> int:
    solution = SolutionDocument(**_read_json(args.input))
    instance = solution.instance.to_domain()
    if isinstance(instance, CosspInstance):
        report = validate_cossp_schedule(instance, solution.schedule.to_cossp())
    else:
        report = validate_pcsp_schedule(instance, solution.schedule.to_migratory())
    if report.ok:
        print("OK")
        return 0
    for v in report.violations:
        where = "".join(
            f" {label}={value}" for label, value in (("job", v.job), ("machine", v.machine))
            if value is not None
        )
        print(f"{v.code}{where}: {v.message}")
    return 1


def cmd_oracle(args: argparse.Namespace) -> int:
    instance = InstancePayload(**_read_json(args.input)).to_domain()
    if isinstance(instance, CosspInstance):
        opt = oracle.opt_cossp(instance)
        report = OracleReport(kind="cossp", cost=_num(opt.cost),
                              completions=[_num(d) for d in opt.deadlines])
    else:
        opt = oracle.opt_pcsp(instance)
        report = OracleReport(kind="pcsp", cost=_num(opt.cost),
                              completions=[_num(c) for c in opt.completions])
    _emit(report.model_dump(mode="json"), None)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    settings = _settings(args)
    rows = asyncio.run(bench_service.bench(
        args.suite, args.out, settings=settings, workers=args.workers,
        database_url=args.db,
    ))
    failed = [r for r in rows if r.status != "ok"]
    print(f"{len(rows)} rows written to {args.out} ({len(failed)} with errors)")
    return 0


# ── Parser ───────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowsched", description="Flow-time scheduling toolkit")
    parser.add_argument("--log-level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="Generate an instance")
    p.add_argument("--kind", required=True, choices=GEN_KINDS)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--pmax", type=int, default=3)
    p.add_argument("--cost-kind", default="flow", choices=gen.COST_KINDS)
    p.add_argument("--edge-prob", type=float, default=0.3)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--delta-inv", type=int, default=None)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta", default="1/2")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve-cossp", help="Approximate a concurrent open-shop instance")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--mode", choices=["rational", "float", "auto"], default=None)
    p.add_argument("--max-rounds", type=int, default=None)
    p.add_argument("--cover", choices=["greedy", "exact"], default=None)
    p.set_defaults(func=cmd_solve_cossp)

    p = sub.add_parser("solve-pcsp", help="Schedule a precedence-constrained instance")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--alpha", type=int, default=None)
    p.add_argument("--expand-chains", action="store_true")
    p.add_argument("--horizon", default="AUTO")
    p.add_argument("--mode", choices=["rational", "float", "auto"], default=None)
    p.set_defaults(func=cmd_solve_pcsp)

    p = sub.add_parser("check", help="Validate a solution document")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("oracle", help="Exact optimum of a tiny instance")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="Run a benchmark suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    timing = p.add_mutually_exclusive_group()
    timing.add_argument("--timings", dest="timings", action="store_true", default=None,
                        help="Record wall-clock ms (reports then differ between runs)")
    timing.add_argument("--no-timings", dest="timings", action="store_false")
    p.add_argument("--db", default=None, help="Archive rows, e.g. sqlite+aiosqlite:///bench.db")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench, timings=None)
    return parser


def run(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=(args.log_level or get_settings().log_level).upper(),
        format="%(asctime)s %(levelname)-8s %(name)s – %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (FlowschedError, ValidationError, OSError, ValueError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
