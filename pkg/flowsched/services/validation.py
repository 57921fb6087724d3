"""
Schedule validators. Defects are collected into a ValidationReport; nothing
here raises for a bad schedule.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from fractions import Fraction
from typing import Optional, Sequence

from flowsched.models import (
    CosspInstance,
    MigratorySchedule,
    Number,
    PcspInstance,
    Schedule,
)
from flowsched.schemas import ValidationReport, Violation

logger = logging.getLogger(__name__)


def _report(violations: list[Violation]) -> ValidationReport:
    if violations:
        logger.debug("validation found %d violation(s): %s", len(violations),
                     sorted({v.code for v in violations}))
    return ValidationReport(ok=not violations, violations=violations)


def validate_cossp_schedule(instance: CosspInstance, schedule: Schedule) -> ValidationReport:
    violations: list[Violation] = []
    n, m = instance.n, instance.m

    if len(schedule.completions) != n:
        violations.append(Violation(
            code="completion-mismatch",
            message=f"{len(schedule.completions)} completions for {n} jobs",
        ))
        return _report(violations)
    if len(schedule.machines) != m:
        violations.append(Violation(
            code="bad-machine",
            message=f"schedule has {len(schedule.machines)} machines, instance has {m}",
        ))

    processed: dict[tuple[int, int], int] = defaultdict(int)
    for i, entries in enumerate(schedule.machines[:m]):
        per_slot: dict[int, int] = defaultdict(int)
        for e in entries:
            if not 0 <= e.job < n:
                violations.append(Violation(code="unknown-job", machine=i,
                                            message=f"slot {e.slot} names job {e.job}"))
                continue
            if e.units <= 0:
                violations.append(Violation(code="speed", job=e.job, machine=i,
                                            message=f"non-positive units in slot {e.slot}"))
                continue
            job = instance.jobs[e.job]
            per_slot[e.slot] += e.units
            processed[(i, e.job)] += e.units
            if e.slot <= job.r:
                violations.append(Violation(
                    code="early-processing", job=e.job, machine=i,
                    message=f"slot {e.slot} is not after release {job.r}",
                ))
            if e.slot > schedule.completions[e.job]:
                violations.append(Violation(
                    code="late-processing", job=e.job, machine=i,
                    message=f"slot {e.slot} after completion {schedule.completions[e.job]}",
                ))
        for slot, units in sorted(per_slot.items()):
            if units > schedule.speed:
                violations.append(Violation(
                    code="machine-overlap", machine=i,
                    message=f"{units} units in slot {slot} at speed {schedule.speed}",
                ))

    for j, job in enumerate(instance.jobs):
        if schedule.completions[j] < job.r:
            violations.append(Violation(
                code="completion-mismatch", job=j,
                message=f"completion {schedule.completions[j]} before release {job.r}",
            ))
        for i in range(m):
            done = processed.get((i, j), 0)
            if done < job.p[i]:
                violations.append(Violation(code="incomplete", job=j, machine=i,
                                            message=f"{done} of {job.p[i]} units processed"))
            elif done > job.p[i]:
                violations.append(Violation(code="over-processed", job=j, machine=i,
                                            message=f"{done} of {job.p[i]} units processed"))
    return _report(violations)


def _overlaps(spans: list[tuple[Fraction, Fraction, int]]) -> list[tuple[int, int, Fraction]]:
    """Pairs (a, b) of tags whose half-open spans intersect, for sorted spans."""
    found = []
    spans = sorted(spans)
    reach_end, reach_tag = None, None
    for start, end, tag in spans:
        if reach_end is not None and start < reach_end:
            found.append((reach_tag, tag, start))
        if reach_end is None or end > reach_end:
            reach_end, reach_tag = end, tag
    return found


def validate_pcsp_schedule(
    instance: PcspInstance,
    mig: MigratorySchedule,
    *,
    sizes: Optional[Sequence[Number]] = None,
    require_nonmigratory: bool = False,
) -> ValidationReport:
    """
    Checks machine and job exclusivity, windows (S~_j, C~_j], releases,
    precedence, rates against the speed and processed volume.

    *sizes* overrides the work each job must receive (list scheduling works
    on truncated sizes).
    """
    violations: list[Violation] = []
    n, m = instance.n, instance.m
    if mig.n != n or len(mig.segments) != n or len(mig.starts) != n:
        violations.append(Violation(
            code="completion-mismatch",
            message=f"schedule describes {mig.n} jobs, instance has {n}",
        ))
        return _report(violations)
    required = [Fraction(x) for x in sizes] if sizes is not None else [
        Fraction(job.p) for job in instance.jobs
    ]

    for j, (job, segs) in enumerate(zip(instance.jobs, mig.segments)):
        start_j, end_j = mig.starts[j], mig.completions[j]
        if start_j < job.r:
            violations.append(Violation(code="early-processing", job=j,
                                        message=f"start {start_j} before release {job.r}"))
        if end_j < start_j:
            violations.append(Violation(code="outside-window", job=j,
                                        message=f"completion {end_j} before start {start_j}"))
        work = Fraction(0)
        for seg in segs:
            if not 0 <= seg.machine < m:
                violations.append(Violation(code="bad-machine", job=j, machine=seg.machine,
                                            message=f"machine {seg.machine} out of range"))
            if seg.end <= seg.start:
                violations.append(Violation(code="outside-window", job=j,
                                            message=f"empty segment ({seg.start}, {seg.end}]"))
            if seg.rate <= 0 or seg.rate > mig.speed:
                violations.append(Violation(code="speed", job=j, machine=seg.machine,
                                            message=f"rate {seg.rate} at speed {mig.speed}"))
            if seg.start < job.r:
                violations.append(Violation(code="early-processing", job=j,
                                            message=f"segment at {seg.start} before release {job.r}"))
            if seg.start < start_j or seg.end > end_j:
                violations.append(Violation(
                    code="outside-window", job=j, machine=seg.machine,
                    message=f"segment ({seg.start}, {seg.end}] outside ({start_j}, {end_j}]",
                ))
            work += seg.work
        if work < required[j]:
            violations.append(Violation(code="incomplete", job=j,
                                        message=f"{work} of {required[j]} units processed"))
        elif work > required[j]:
            violations.append(Violation(code="over-processed", job=j,
                                        message=f"{work} of {required[j]} units processed"))
        for a, b, at in _overlaps([(s.start, s.end, k) for k, s in enumerate(segs)]):
            violations.append(Violation(code="job-overlap", job=j,
                                        message=f"job runs twice at {at}"))
        if require_nonmigratory and len({s.machine for s in segs}) > 1:
            violations.append(Violation(code="migration", job=j,
                                        message="job runs on more than one machine"))

    for i, timeline in enumerate(mig.machine_timelines(m)):
        for a, b, at in _overlaps([(seg.start, seg.end, j) for seg, j in timeline]):
            violations.append(Violation(code="machine-overlap", machine=i,
                                        message=f"jobs {a} and {b} share machine {i} at {at}"))

    for a, b in instance.edges:
        first = min((s.start for s in mig.segments[b]), default=mig.completions[b])
        if mig.starts[b] < mig.completions[a] or first < mig.completions[a]:
            violations.append(Violation(
                code="precedence", job=b,
                message=f"job {b} starts at {min(first, mig.starts[b])} before "
                        f"predecessor {a} completes at {mig.completions[a]}",
            ))
    return _report(violations)
