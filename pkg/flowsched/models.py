"""
Domain types shared by every pipeline: delay costs, the two problem
instances, and the two schedule shapes.

Time convention: integer time, unit slot t covers (t-1, t]. A job released
at r may be processed from slot r+1 on; "done by C" means all processing
happens in slots <= C. Migratory schedules use exact rational time.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple, Union

import networkx as nx

from flowsched.exceptions import (
    CycleDetectedError,
    InstanceValidationError,
    InvalidCompletionError,
)

Number = Union[int, Fraction]


# ── Delay costs ──────────────────────────────────────────────────────────────

class CostKind(str, Enum):
    FLOW = "weighted-flow"
    POWER = "weighted-power"
    TARDINESS = "weighted-tardiness"
    TABLE = "table"


@dataclass(frozen=True)
class DelayCost:
    """Non-decreasing integer cost g(t) of completing a job at time t."""
    kind: CostKind
    w: int = 1
    r: int = 0           # offset for flow / power kinds
    p: int = 1           # exponent for the power kind
    d: int = 0           # due date for the tardiness kind
    steps: Tuple[Tuple[int, int], ...] = ()

    @classmethod
    def flow(cls, w: int = 1, r: int = 0) -> "DelayCost":
        return cls(CostKind.FLOW, w=w, r=r)

    @classmethod
    def power(cls, w: int, p: int, r: int = 0) -> "DelayCost":
        return cls(CostKind.POWER, w=w, p=p, r=r)

    @classmethod
    def tardiness(cls, w: int, d: int) -> "DelayCost":
        return cls(CostKind.TARDINESS, w=w, d=d)

    @classmethod
    def table(cls, steps: Iterable[Tuple[int, int]]) -> "DelayCost":
        return cls(CostKind.TABLE, steps=tuple(sorted((int(t), int(v)) for t, v in steps)))

    def validate(self) -> None:
        if self.w < 0 or self.r < 0 or self.d < 0:
            raise InstanceValidationError(f"negative cost parameter in {self}")
        if self.kind is CostKind.POWER and self.p < 1:
            raise InstanceValidationError(f"power exponent must be >= 1, got {self.p}")
        if self.kind is CostKind.TABLE:
            values = [v for _, v in self.steps]
            if any(v < 0 for v in values):
                raise InstanceValidationError("table costs must be non-negative")
            if any(b < a for a, b in zip(values, values[1:])):
                raise InstanceValidationError("table cost is not non-decreasing")

    def __call__(self, t: Number) -> Number:
        return eval_cost(self, t)


def eval_cost(g: DelayCost, t: Number) -> Number:
    """g(t). Exact: integers stay integers, rationals stay rationals."""
    if g.kind is CostKind.FLOW:
        return g.w * max(0, t - g.r)
    if g.kind is CostKind.POWER:
        return g.w * max(0, t - g.r) ** g.p
    if g.kind is CostKind.TARDINESS:
        return g.w * max(0, t - g.d)
    value = 0
    for step_t, step_v in g.steps:
        if step_t > t:
            break
        value = step_v
    return value


def latest_time_within_budget(
    g: DelayCost, budget: Number, lo: int, hi: int
) -> Optional[int]:
    """Largest integer t in (lo, hi] with g(t) <= budget, or None."""
    if lo >= hi:
        raise InstanceValidationError(f"empty search range ({lo}, {hi}]")
    if eval_cost(g, lo + 1) > budget:
        return None
    a, b = lo + 1, hi          # g(a) <= budget holds
    while a < b:
        mid = (a + b + 1) // 2
        if eval_cost(g, mid) <= budget:
            a = mid
        else:
            b = mid - 1
    return a


# ── Instances ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CosspJob:
    r: int
    p: Tuple[int, ...]          # operation length per machine
    cost: DelayCost


@dataclass(frozen=True)
class CosspInstance:
    m: int
    jobs: Tuple[CosspJob, ...]

    @property
    def n(self) -> int:
        return len(self.jobs)

    @cached_property
    def L(self) -> int:
        return max((sum(job.p[i] for job in self.jobs) for i in range(self.m)), default=0)

    @cached_property
    def horizon(self) -> int:
        """Every reasonable schedule completes by max release + L."""
        return max((job.r for job in self.jobs), default=0) + self.L

    @cached_property
    def P(self) -> Fraction:
        nonzero = [x for job in self.jobs for x in job.p if x > 0]
        if not nonzero:
            return Fraction(1)
        return Fraction(max(nonzero), min(nonzero))

    def workload(self, j: int) -> int:
        return sum(self.jobs[j].p)

    def validate(self) -> "CosspInstance":
        if self.m < 1:
            raise InstanceValidationError("machine count must be >= 1")
        if not self.jobs:
            raise InstanceValidationError("instance has no jobs")
        for j, job in enumerate(self.jobs):
            if job.r < 0:
                raise InstanceValidationError(f"job {j}: negative release")
            if len(job.p) != self.m:
                raise InstanceValidationError(
                    f"job {j}: {len(job.p)} operation lengths for {self.m} machines"
                )
            if any(x < 0 for x in job.p):
                raise InstanceValidationError(f"job {j}: negative operation length")
            job.cost.validate()
        if all(x == 0 for job in self.jobs for x in job.p):
            raise InstanceValidationError("instance has no positive operation")
        return self


@dataclass(frozen=True)
class PcspJob:
    p: int
    r: int
    cost: DelayCost


@dataclass(frozen=True)
class PcspInstance:
    m: int
    jobs: Tuple[PcspJob, ...]
    edges: Tuple[Tuple[int, int], ...] = ()

    @property
    def n(self) -> int:
        return len(self.jobs)

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    @cached_property
    def topological_order(self) -> Tuple[int, ...]:
        try:
            return tuple(nx.lexicographical_topological_sort(self.graph))
        except nx.NetworkXUnfeasible as exc:
            raise CycleDetectedError("precedence relation has a cycle") from exc

    def predecessors(self, j: int) -> list[int]:
        return sorted(self.graph.predecessors(j))

    def successors(self, j: int) -> list[int]:
        return sorted(self.graph.successors(j))

    @cached_property
    def P(self) -> Fraction:
        sizes = [job.p for job in self.jobs if job.p > 0]
        if not sizes:
            return Fraction(1)
        return Fraction(max(sizes), min(sizes))

    def validate(self) -> "PcspInstance":
        if self.m < 1:
            raise InstanceValidationError("machine count must be >= 1")
        if not self.jobs:
            raise InstanceValidationError("instance has no jobs")
        for j, job in enumerate(self.jobs):
            if job.p < 0 or job.r < 0:
                raise InstanceValidationError(f"job {j}: negative size or release")
            job.cost.validate()
        for a, b in self.edges:
            if not (0 <= a < self.n and 0 <= b < self.n) or a == b:
                raise InstanceValidationError(f"bad precedence edge ({a}, {b})")
        self.topological_order    # raises on cycles
        return self


Instance = Union[CosspInstance, PcspInstance]


def total_cost(instance: Instance, completions: Sequence[Number]) -> Number:
    """Sum of g_j(C_j); rejects completions before release."""
    if len(completions) != instance.n:
        raise InvalidCompletionError(
            f"{len(completions)} completions for {instance.n} jobs"
        )
    total: Number = 0
    for j, (job, c) in enumerate(zip(instance.jobs, completions)):
        if c < job.r:
            raise InvalidCompletionError(f"job {j} completes at {c} before release {job.r}")
        total += eval_cost(job.cost, c)
    return total


# ── Weighted → unit weights ──────────────────────────────────────────────────

def expand_weights_to_dummies(instance: PcspInstance) -> PcspInstance:
    """
    Replace every weight-w flow job by a weight-0 job followed by w zero-size
    unit-weight dummies (same flow offset). Dummies are appended after the
    original jobs, grouped by parent in job order.
    """
    jobs = list(instance.jobs)
    edges = list(instance.edges)
    dummies: list[PcspJob] = []
    for j, job in enumerate(instance.jobs):
        if job.cost.kind is not CostKind.FLOW:
            raise InstanceValidationError(
                f"job {j}: dummy expansion needs weighted-flow costs, got {job.cost.kind.value}"
            )
        jobs[j] = PcspJob(p=job.p, r=job.r, cost=DelayCost.flow(0, job.cost.r))
        for _ in range(job.cost.w):
            edges.append((j, instance.n + len(dummies)))
            dummies.append(PcspJob(p=0, r=job.r, cost=DelayCost.flow(1, job.cost.r)))
    return PcspInstance(m=instance.m, jobs=tuple(jobs + dummies), edges=tuple(edges))


def extend_completions(instance: PcspInstance, completions: Sequence[Number]) -> list[Number]:
    """Completion vector of expand_weights_to_dummies(instance): dummies finish with parents."""
    extended = list(completions)
    for j, job in enumerate(instance.jobs):
        extended.extend([completions[j]] * job.cost.w)
    return extended


# ── Schedules ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SlotEntry:
    slot: int
    job: int
    units: int = 1


@dataclass(frozen=True)
class Schedule:
    """Slot timeline per machine (COSSP)."""
    machines: Tuple[Tuple[SlotEntry, ...], ...]
    completions: Tuple[int, ...]
    speed: int = 1


@dataclass(frozen=True)
class Segment:
    machine: int
    start: Fraction
    end: Fraction
    rate: Fraction

    @property
    def length(self) -> Fraction:
        return self.end - self.start

    @property
    def work(self) -> Fraction:
        return self.rate * (self.end - self.start)


@dataclass(frozen=True)
class MigratorySchedule:
    """Continuous-time schedule (PCSP); segments[j] lists job j's pieces."""
    speed: Fraction
    segments: Tuple[Tuple[Segment, ...], ...]
    completions: Tuple[Fraction, ...]
    starts: Tuple[Fraction, ...]

    @property
    def n(self) -> int:
        return len(self.completions)

    def machine_timelines(self, m: int) -> list[list[Tuple[Segment, int]]]:
        per_machine: list[list[Tuple[Segment, int]]] = [[] for _ in range(m)]
        for j, segs in enumerate(self.segments):
            for seg in segs:
                if 0 <= seg.machine < m:
                    per_machine[seg.machine].append((seg, j))
        for timeline in per_machine:
            timeline.sort(key=lambda item: (item[0].start, item[0].end, item[1]))
        return per_machine

    @property
    def is_migratory(self) -> bool:
        return any(len({s.machine for s in segs}) > 1 for segs in self.segments)
