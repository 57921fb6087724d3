"""
Benchmark harness: build a named suite, run every case through the solvers
(and the exact oracles where asked), write the CSV report plus its JSON
companion, optionally archive the rows.
"""
from __future__ import annotations

import asyncio
import json
import logging
import time
import uuid
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Union

import pandas as pd

from flowsched.config import Settings, SuiteEntry, get_settings
from flowsched.database import archive_rows
from flowsched.exceptions import FlowschedError, InstanceValidationError
from flowsched.models import CosspInstance, PcspInstance, total_cost
from flowsched.schemas import BenchRow
from flowsched.services import gen, oracle
from flowsched.services.cossp import solve_cossp
from flowsched.services.pcsp import solve_pcsp

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["id", "n", "m", "P", "solver", "cost", "lp_bound", "ratio", "speed", "ms"]

Number = Union[int, float, Fraction]


def fmt_number(value: Optional[Number]) -> str:
    """Integers verbatim, everything else with six decimals."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int) or (isinstance(value, Fraction) and value.denominator == 1):
        return str(int(value))
    return f"{float(value):.6f}"


@dataclass(frozen=True)
class BenchCase:
    id: str
    entry: SuiteEntry
    seed: int
    instance: Union[CosspInstance, PcspInstance]
    dks: Optional[gen.DksGraph] = None


def build_suite(name: str, settings: Optional[Settings] = None,
                seed: Optional[int] = None) -> List[BenchCase]:
    settings = settings or get_settings()
    if name not in settings.bench_suites:
        raise InstanceValidationError(
            f"unknown suite {name!r}; known: {', '.join(sorted(settings.bench_suites))}"
        )
    seed = settings.seed if seed is None else seed
    cases: List[BenchCase] = []
    for entry in settings.bench_suites[name]:
        for k in range(entry.count):
            s = seed + k
            case_id = f"{entry.kind}-{len(cases):03d}"
            if entry.kind == "random-cossp":
                inst = gen.random_cossp(s, entry.n, entry.m, entry.pmax, entry.cost_kind)
                cases.append(BenchCase(case_id, entry, s, inst))
            elif entry.kind == "random-pcsp":
                inst = gen.random_pcsp(s, entry.n, entry.m, entry.pmax, entry.edge_prob)
                cases.append(BenchCase(case_id, entry, s, inst))
            elif entry.kind == "dks":
                graph = gen.planted_dks_graph(s, entry.n, max(2, entry.n // 2),
                                              entry.edge_prob, delta_inv=1)
                cases.append(BenchCase(case_id, entry, s, gen.dks_reduction(graph).instance, graph))
            else:
                base = gen.random_pcsp(s, entry.n, entry.m, 1, entry.edge_prob)
                inst = gen.makespan_gap_instance(base, 2, 1, Fraction(1, 2)).instance
                cases.append(BenchCase(case_id, entry, s, inst))
    return cases


def _row(case: BenchCase, solver: str, **values) -> BenchRow:
    inst = case.instance
    return BenchRow(id=case.id, n=inst.n, m=inst.m, P=fmt_number(inst.P), solver=solver, **values)


def _timed(fn, timings: bool):
    start = time.perf_counter()
    result = fn()
    ms = int(round((time.perf_counter() - start) * 1000)) if timings else 0
    return result, ms


def _attempt(case: BenchCase, solver: str, fn) -> BenchRow:
    try:
        return fn()
    except FlowschedError as exc:
        logger.warning("%s / %s failed: %s", case.id, solver, exc)
        return _row(case, solver, status=f"error: {exc}")


def run_case(case: BenchCase, settings: Optional[Settings] = None) -> List[BenchRow]:
    """Rows for one case; solver failures become rows with an error status."""
    settings = settings or get_settings()
    timings = settings.bench_timings
    rows: List[BenchRow] = []
    inst = case.instance

    if isinstance(inst, CosspInstance):
        def cossp_row() -> BenchRow:
            res, ms = _timed(lambda: solve_cossp(inst, settings=settings), timings)
            return _row(case, "cossp", cost=fmt_number(res.cost), lp_bound=fmt_number(res.lp_bound),
                        ratio=fmt_number(res.ratio), speed="1", ms=ms)
        rows.append(_attempt(case, "cossp", cossp_row))
        if case.entry.oracle:
            def oracle_row() -> BenchRow:
                opt, ms = _timed(lambda: oracle.opt_cossp(inst), timings)
                return _row(case, "opt-cossp", cost=fmt_number(opt.cost), speed="1", ms=ms)
            rows.append(_attempt(case, "opt-cossp", oracle_row))
        return rows

    if case.dks is not None:
        graph = case.dks
        subset = list(range(graph.k))
        def case1_row() -> BenchRow:
            sched, ms = _timed(lambda: gen.dks_case1_schedule(graph, subset), timings)
            return _row(case, "dks-case1", cost=fmt_number(total_cost(inst, sched.completions)),
                        speed="1", ms=ms)
        rows.append(_attempt(case, "dks-case1", case1_row))
        return rows

    def pcsp_row() -> BenchRow:
        res, ms = _timed(lambda: solve_pcsp(inst, settings=settings), timings)
        ratio = res.cost / res.lp_bound if res.lp_bound > 0 else None
        return _row(case, "pcsp", cost=fmt_number(res.cost), lp_bound=fmt_number(res.lp_bound),
                    ratio=fmt_number(ratio), speed=fmt_number(res.speed), ms=ms)
    rows.append(_attempt(case, "pcsp", pcsp_row))
    if case.entry.oracle:
        def opt_row() -> BenchRow:
            opt, ms = _timed(lambda: oracle.opt_pcsp(inst), timings)
            return _row(case, "opt-pcsp", cost=fmt_number(opt.cost), speed="1", ms=ms)
        rows.append(_attempt(case, "opt-pcsp", opt_row))
    return rows


async def run_bench(cases: List[BenchCase], settings: Optional[Settings] = None,
                    workers: Optional[int] = None) -> List[BenchRow]:
    """Cases run concurrently in worker threads; rows keep suite order."""
    settings = settings or get_settings()
    gate = asyncio.Semaphore(max(1, workers or settings.bench_workers))

    async def one(case: BenchCase) -> List[BenchRow]:
        async with gate:
            return await asyncio.to_thread(run_case, case, settings)

    grouped = await asyncio.gather(*(one(c) for c in cases))
    rows = [row for group in grouped for row in group]
    logger.info("bench: %d cases, %d rows", len(cases), len(rows))
    return rows


def write_report(rows: List[BenchRow], out: Union[str, Path]) -> Path:
    """CSV at *out*, JSON companion (with the status column) next to it."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.model_dump() for r in rows],
                         columns=CSV_COLUMNS + ["status"])
    frame[CSV_COLUMNS].to_csv(out, index=False, lineterminator="\n")
    companion = out.with_suffix(".json")
    companion.write_text(json.dumps([r.model_dump() for r in rows], indent=2) + "\n",
                         encoding="utf-8")
    return companion


async def bench(suite: str, out: Union[str, Path], settings: Optional[Settings] = None,
                workers: Optional[int] = None, seed: Optional[int] = None,
                database_url: Optional[str] = None) -> List[BenchRow]:
    settings = settings or get_settings()
    cases = build_suite(suite, settings, seed)
    rows = await run_bench(cases, settings, workers)
    write_report(rows, out)
    url = database_url or settings.database_url
    if url:
        await archive_rows(url, uuid.uuid4().hex, rows)
    return rows
