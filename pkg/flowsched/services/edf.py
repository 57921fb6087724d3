"""
Excess of an interval, the EDF deadline-feasibility condition and the
per-machine EDF schedule built from feasible deadlines.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Tuple

from flowsched.exceptions import InfeasibleDeadlinesError
from flowsched.models import CosspInstance, Schedule, SlotEntry

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Interval:
    t1: int
    t2: int

    def __post_init__(self) -> None:
        if self.t2 < self.t1:
            raise ValueError(f"interval [{self.t1}, {self.t2}] is reversed")

    @property
    def capacity(self) -> int:
        return self.t2 - self.t1


Witness = Tuple[int, Interval]


@dataclass(frozen=True)
class EdfResult:
    feasible: bool
    witness: Optional[Witness] = None

    def __bool__(self) -> bool:
        return self.feasible


def released_in(instance: CosspInstance, interval: Interval) -> list[int]:
    """J(I): jobs released inside [t1, t2]."""
    return [j for j, job in enumerate(instance.jobs) if interval.t1 <= job.r <= interval.t2]


def excess(instance: CosspInstance, i: int, interval: Interval) -> int:
    if not 0 <= i < instance.m:
        raise IndexError(f"machine {i} out of range for m={instance.m}")
    load = sum(instance.jobs[j].p[i] for j in released_in(instance, interval))
    return max(0, load - interval.capacity)


def _satisfied(instance: CosspInstance, deadlines: Sequence[int], i: int, interval: Interval) -> bool:
    jobs = released_in(instance, interval)
    late = sum(instance.jobs[j].p[i] for j in jobs if deadlines[j] > interval.t2)
    load = sum(instance.jobs[j].p[i] for j in jobs)
    return late >= max(0, load - interval.capacity)


def candidate_intervals(instance: CosspInstance, deadlines: Sequence[int]) -> Iterator[Interval]:
    """Intervals with t1 at a release and t2 at a release or deadline."""
    releases = sorted({job.r for job in instance.jobs})
    ends = sorted(set(releases) | set(deadlines))
    for t1 in releases:
        for t2 in ends:
            if t2 >= t1:
                yield Interval(t1, t2)


def all_intervals(horizon: int) -> Iterator[Interval]:
    for t1 in range(horizon + 1):
        for t2 in range(t1, horizon + 1):
            yield Interval(t1, t2)


def lemma_violations(
    instance: CosspInstance, deadlines: Sequence[int], intervals: Iterable[Interval]
) -> list[Witness]:
    """Every (machine, interval) of *intervals* where late work falls short of the excess."""
    intervals = list(intervals)
    return [
        (i, interval)
        for i in range(instance.m)
        for interval in intervals
        if not _satisfied(instance, deadlines, i, interval)
    ]


def edf_feasible(instance: CosspInstance, deadlines: Sequence[int]) -> EdfResult:
    if len(deadlines) != instance.n:
        raise ValueError(f"{len(deadlines)} deadlines for {instance.n} jobs")
    intervals = list(candidate_intervals(instance, deadlines))
    for i in range(instance.m):
        for interval in intervals:
            if not _satisfied(instance, deadlines, i, interval):
                return EdfResult(False, (i, interval))
    return EdfResult(True)


def build_edf_schedule(instance: CosspInstance, deadlines: Sequence[int]) -> Schedule:
    """Per-machine EDF; ties go to the lower job index."""
    check = edf_feasible(instance, deadlines)
    if not check:
        raise InfeasibleDeadlinesError(check.witness)

    last_slot = [job.r for job in instance.jobs]
    machines: list[Tuple[SlotEntry, ...]] = []
    for i in range(instance.m):
        remaining = {j: job.p[i] for j, job in enumerate(instance.jobs) if job.p[i] > 0}
        entries: list[SlotEntry] = []
        t = min((instance.jobs[j].r for j in remaining), default=0)
        while remaining:
            ready = [j for j in remaining if instance.jobs[j].r < t + 1]
            if not ready:
                t = min(instance.jobs[j].r for j in remaining)
                continue
            j = min(ready, key=lambda k: (deadlines[k], k))
            t += 1
            entries.append(SlotEntry(slot=t, job=j))
            remaining[j] -= 1
            if remaining[j] == 0:
                del remaining[j]
                last_slot[j] = max(last_slot[j], t)
        machines.append(tuple(entries))

    logger.debug("EDF schedule built: completions=%s", last_slot)
    return Schedule(machines=tuple(machines), completions=tuple(last_slot))
