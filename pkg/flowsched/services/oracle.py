"""
Exhaustive optimal baselines for tiny instances.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from flowsched.exceptions import LimitExceededError, UncoverablePointError
from flowsched.models import (
    CosspInstance,
    MigratorySchedule,
    PcspInstance,
    Segment,
    eval_cost,
)
from flowsched.services.cover import CoverInstance, contains
from flowsched.services.edf import edf_feasible

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CosspOptimum:
    cost: int
    deadlines: Tuple[int, ...]


@dataclass(frozen=True)
class PcspOptimum:
    cost: int
    completions: Tuple[int, ...]
    schedule: MigratorySchedule


# ── COSSP ────────────────────────────────────────────────────────────────────

def _candidate_times(instance: CosspInstance) -> List[List[int]]:
    H = instance.horizon
    out = []
    for job in instance.jobs:
        longest = max(job.p)
        if longest == 0:
            out.append([job.r])
        else:
            out.append(list(range(job.r + longest, H + 1)))
    return out


def opt_cossp(instance: CosspInstance, horizon_limit: int = 12, n_limit: int = 4) -> CosspOptimum:
    """Cheapest EDF-feasible deadline vector over times in [r_j + max_i p_ij, H]."""
    if instance.n > n_limit or instance.horizon > horizon_limit:
        raise LimitExceededError(
            f"oracle limited to n <= {n_limit}, horizon <= {horizon_limit} "
            f"(got n={instance.n}, horizon={instance.horizon})"
        )
    candidates = _candidate_times(instance)
    costs = [[eval_cost(job.cost, t) for t in cands] for job, cands in zip(instance.jobs, candidates)]
    floor = [min(c) for c in costs]
    suffix = [sum(floor[j:]) for j in range(instance.n + 1)]
    best: Dict[str, object] = {"cost": None, "deadlines": None}
    chosen: List[int] = []

    def search(j: int, spent: int) -> None:
        if best["cost"] is not None and spent + suffix[j] >= best["cost"]:
            return
        if j == instance.n:
            if edf_feasible(instance, chosen):
                best["cost"], best["deadlines"] = spent, tuple(chosen)
            return
        for t, c in zip(candidates[j], costs[j]):
            chosen.append(t)
            search(j + 1, spent + c)
            chosen.pop()

    search(0, 0)
    return CosspOptimum(int(best["cost"]), best["deadlines"])


def opt_cossp_by_schedule(instance: CosspInstance, horizon_limit: int = 12, n_limit: int = 3) -> int:
    """Direct slot search: every machine works on some released job whenever it can."""
    if instance.n > n_limit or instance.horizon > horizon_limit:
        raise LimitExceededError(f"schedule oracle limited to n <= {n_limit}")
    n, m = instance.n, instance.m
    base = sum(eval_cost(job.cost, job.r) for job in instance.jobs if sum(job.p) == 0)

    @lru_cache(maxsize=None)
    def best(t: int, remaining: Tuple[Tuple[int, ...], ...]) -> int:
        open_jobs = [j for j in range(n) if any(remaining[i][j] for i in range(m))]
        if not open_jobs:
            return 0
        per_machine = []
        for i in range(m):
            ready = [j for j in range(n) if remaining[i][j] > 0 and instance.jobs[j].r <= t]
            per_machine.append(ready or [None])
        if all(opts == [None] for opts in per_machine):
            nxt = min(instance.jobs[j].r for j in open_jobs)
            return best(nxt, remaining)
        result = None
        for choice in itertools.product(*per_machine):
            rows = [list(r) for r in remaining]
            for i, j in enumerate(choice):
                if j is not None:
                    rows[i][j] -= 1
            after = tuple(tuple(r) for r in rows)
            finished = [j for j in open_jobs if not any(after[i][j] for i in range(m))]
            value = sum(eval_cost(instance.jobs[j].cost, t + 1) for j in finished)
            value += best(t + 1, after)
            if result is None or value < result:
                result = value
        return result

    start = tuple(tuple(instance.jobs[j].p[i] for j in range(n)) for i in range(m))
    return base + best(0, start)


def deadlines_feasible_by_search(instance: CosspInstance, deadlines: Sequence[int]) -> bool:
    """Per-machine search over slot assignments for the given deadlines."""
    n = instance.n
    for i in range(instance.m):
        jobs = [j for j in range(n) if instance.jobs[j].p[i] > 0]
        if not jobs:
            continue

        @lru_cache(maxsize=None)
        def ok(t: int, remaining: Tuple[int, ...]) -> bool:
            if not any(remaining):
                return True
            for k, j in enumerate(jobs):
                if remaining[k] and deadlines[j] <= t:
                    return False
            ready = [k for k, j in enumerate(jobs) if remaining[k] and instance.jobs[j].r <= t]
            options = ready + [None]
            for k in options:
                nxt = list(remaining)
                if k is not None:
                    nxt[k] -= 1
                if ok(t + 1, tuple(nxt)):
                    return True
            return False

        if not ok(0, tuple(instance.jobs[j].p[i] for j in jobs)):
            return False
    return True


# ── PCSP ─────────────────────────────────────────────────────────────────────

def opt_pcsp(instance: PcspInstance, n_limit: int = 6, m_limit: int = 3,
             horizon_limit: int = 40) -> PcspOptimum:
    """
    Exhaustive slot search at speed 1. Each slot runs min(m, |ready|) ready
    jobs; zero-size jobs complete as soon as they are ready.
    """
    instance.validate()
    horizon = max(job.r for job in instance.jobs) + sum(job.p for job in instance.jobs)
    if instance.n > n_limit or instance.m > m_limit or horizon > horizon_limit:
        raise LimitExceededError(
            f"pcsp oracle limited to n <= {n_limit}, m <= {m_limit}, horizon <= {horizon_limit}"
        )
    n, m = instance.n, instance.m
    preds = [frozenset(instance.predecessors(j)) for j in range(n)]

    def close_zero(t: int, remaining: Tuple[int, ...], done: frozenset) -> Tuple[frozenset, List[int]]:
        closed: List[int] = []
        changed = True
        while changed:
            changed = False
            for j in range(n):
                if (j not in done and instance.jobs[j].p == 0 and instance.jobs[j].r <= t
                        and preds[j] <= done):
                    done = done | {j}
                    closed.append(j)
                    changed = True
        return done, closed

    @lru_cache(maxsize=None)
    def best(t: int, remaining: Tuple[int, ...], done: frozenset) -> Tuple[int, tuple]:
        done, closed = close_zero(t, remaining, done)
        cost_now = sum(eval_cost(instance.jobs[j].cost, t) for j in closed)
        if len(done) == n:
            return cost_now, ()
        ready = [j for j in range(n)
                 if j not in done and remaining[j] > 0 and instance.jobs[j].r <= t and preds[j] <= done]
        if not ready:
            pending = [instance.jobs[j].r for j in range(n) if j not in done and instance.jobs[j].r > t]
            nxt = min(pending) if pending else t + 1
            value, plan = best(nxt, remaining, done)
            return cost_now + value, plan
        result: Optional[Tuple[int, tuple]] = None
        for chosen in itertools.combinations(ready, min(m, len(ready))):
            nxt = list(remaining)
            for j in chosen:
                nxt[j] -= 1
            finished = frozenset(j for j in chosen if nxt[j] == 0)
            value = sum(eval_cost(instance.jobs[j].cost, t + 1) for j in finished)
            sub, plan = best(t + 1, tuple(nxt), done | finished)
            value += sub
            if result is None or value < result[0]:
                result = (value, ((t, chosen),) + plan)
        return cost_now + result[0], result[1]

    cost, plan = best(0, tuple(job.p for job in instance.jobs), frozenset())

    # Rebuild the schedule from the plan.
    segments: List[List[Segment]] = [[] for _ in range(n)]
    for t, chosen in plan:
        for machine, j in enumerate(chosen):
            segments[j].append(Segment(machine, Fraction(t), Fraction(t + 1), Fraction(1)))
    completions = [Fraction(0)] * n
    for j in instance.topological_order:
        job = instance.jobs[j]
        ready_at = max([Fraction(job.r)] + [completions[a] for a in preds[j]])
        completions[j] = max([ready_at] + [s.end for s in segments[j]])
    starts = [max([Fraction(instance.jobs[j].r)] + [completions[a] for a in preds[j]]) for j in range(n)]
    schedule = MigratorySchedule(Fraction(1), tuple(tuple(s) for s in segments),
                                 tuple(completions), tuple(starts))
    logger.debug("pcsp oracle: cost %s over %d slot decisions", cost, len(plan))
    return PcspOptimum(cost, tuple(int(c) for c in completions), schedule)


# ── Cover ────────────────────────────────────────────────────────────────────

def opt_cover(instance: CoverInstance, object_limit: int = 12) -> Fraction:
    """Minimum selection weight by enumerating every subset."""
    if len(instance.objects) > object_limit:
        raise LimitExceededError(f"{len(instance.objects)} objects exceed {object_limit}")
    incidence = [[contains(o, p) for o in instance.objects] for p in instance.points]
    best: Optional[Fraction] = None
    for size in range(len(instance.objects) + 1):
        for subset in itertools.combinations(range(len(instance.objects)), size):
            if all(sum(row[b] for b in subset) >= p.demand
                   for row, p in zip(incidence, instance.points)):
                weight = sum((Fraction(instance.objects[b].weight) for b in subset), Fraction(0))
                if best is None or weight < best:
                    best = weight
    if best is None:
        raise UncoverablePointError(None, "no subset of objects meets every demand")
    return best
