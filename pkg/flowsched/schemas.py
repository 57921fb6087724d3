"""
Pydantic schemas for the JSON documents read and written by the CLI.

Rational times are encoded as strings ("7/2", "3"); integers are accepted
wherever a rational is expected.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator

from flowsched.exceptions import InstanceValidationError
from flowsched.models import (
    CosspInstance,
    CosspJob,
    CostKind,
    DelayCost,
    MigratorySchedule,
    PcspInstance,
    PcspJob,
    Schedule,
    Segment,
    SlotEntry,
)


def fmt_rational(value: Union[int, Fraction]) -> str:
    return str(Fraction(value))


def parse_rational(value: Union[str, int, Fraction]) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise InstanceValidationError(f"not a rational number: {value!r}") from exc


# ── Instances ────────────────────────────────────────────────────────────────

class CostPayload(BaseModel):
    kind: Literal["weighted-flow", "weighted-power", "weighted-tardiness", "table"]
    w: int = Field(1, ge=0)
    r: int = Field(0, ge=0)
    p: int = Field(1, ge=1)
    d: int = Field(0, ge=0)
    steps: List[Tuple[int, int]] = []

    def to_domain(self) -> DelayCost:
        kind = CostKind(self.kind)
        if kind is CostKind.TABLE:
            return DelayCost.table(self.steps)
        return DelayCost(kind, w=self.w, r=self.r, p=self.p, d=self.d)

    @classmethod
    def from_domain(cls, g: DelayCost) -> "CostPayload":
        if g.kind is CostKind.FLOW:
            return cls(kind=g.kind.value, w=g.w, r=g.r)
        if g.kind is CostKind.POWER:
            return cls(kind=g.kind.value, w=g.w, p=g.p, r=g.r)
        if g.kind is CostKind.TARDINESS:
            return cls(kind=g.kind.value, w=g.w, d=g.d)
        return cls(kind=g.kind.value, steps=list(g.steps))

    def to_json_dict(self) -> Dict[str, Any]:
        # Only the fields that belong to the kind.
        keep = {
            "weighted-flow": ("kind", "w", "r"),
            "weighted-power": ("kind", "w", "p", "r"),
            "weighted-tardiness": ("kind", "w", "d"),
            "table": ("kind", "steps"),
        }[self.kind]
        return self.model_dump(mode="json", include=set(keep))


class JobPayload(BaseModel):
    r: int = Field(..., ge=0)
    p: Union[List[int], int]
    cost: CostPayload


class InstancePayload(BaseModel):
    kind: Literal["cossp", "pcsp"]
    m: int = Field(..., ge=1)
    jobs: List[JobPayload]
    edges: List[Tuple[int, int]] = []

    def to_domain(self) -> Union[CosspInstance, PcspInstance]:
        if self.kind == "cossp":
            if self.edges:
                raise InstanceValidationError("cossp instances take no precedence edges")
            jobs = []
            for j, job in enumerate(self.jobs):
                if not isinstance(job.p, list):
                    raise InstanceValidationError(f"job {j}: cossp needs a list of op lengths")
                jobs.append(CosspJob(r=job.r, p=tuple(job.p), cost=job.cost.to_domain()))
            return CosspInstance(m=self.m, jobs=tuple(jobs)).validate()
        jobs_p = []
        for j, job in enumerate(self.jobs):
            if isinstance(job.p, list):
                raise InstanceValidationError(f"job {j}: pcsp needs a scalar size")
            jobs_p.append(PcspJob(p=job.p, r=job.r, cost=job.cost.to_domain()))
        return PcspInstance(
            m=self.m, jobs=tuple(jobs_p), edges=tuple(tuple(e) for e in self.edges)
        ).validate()

    @classmethod
    def from_domain(cls, instance: Union[CosspInstance, PcspInstance]) -> "InstancePayload":
        if isinstance(instance, CosspInstance):
            return cls(
                kind="cossp",
                m=instance.m,
                jobs=[
                    JobPayload(r=job.r, p=list(job.p), cost=CostPayload.from_domain(job.cost))
                    for job in instance.jobs
                ],
            )
        return cls(
            kind="pcsp",
            m=instance.m,
            jobs=[
                JobPayload(r=job.r, p=job.p, cost=CostPayload.from_domain(job.cost))
                for job in instance.jobs
            ],
            edges=[tuple(e) for e in instance.edges],
        )

    def to_json_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "kind": self.kind,
            "m": self.m,
            "jobs": [
                {"r": job.r, "p": job.p, "cost": job.cost.to_json_dict()} for job in self.jobs
            ],
        }
        if self.kind == "pcsp":
            doc["edges"] = [list(e) for e in self.edges]
        return doc


# ── Schedules ────────────────────────────────────────────────────────────────

class SegmentPayload(BaseModel):
    job: int
    start: str
    end: str
    rate: str = "1"

    @field_validator("start", "end", "rate", mode="before")
    @classmethod
    def _coerce_rational(cls, v: Any) -> str:
        return fmt_rational(parse_rational(v))


class ScheduleDocument(BaseModel):
    """Per-machine segment lists; COSSP slot t is the segment (t-1, t]."""
    kind: Literal["cossp", "pcsp"]
    speed: str = "1"
    completions: List[str]
    starts: List[str] = []
    machines: List[List[SegmentPayload]]

    @field_validator("speed", mode="before")
    @classmethod
    def _coerce_speed(cls, v: Any) -> str:
        return fmt_rational(parse_rational(v))

    @field_validator("completions", "starts", mode="before")
    @classmethod
    def _coerce_list(cls, v: Any) -> List[str]:
        return [fmt_rational(parse_rational(x)) for x in v]

    @classmethod
    def from_cossp(cls, schedule: Schedule) -> "ScheduleDocument":
        return cls(
            kind="cossp",
            speed=str(schedule.speed),
            completions=[str(c) for c in schedule.completions],
            machines=[
                [
                    SegmentPayload(job=e.job, start=e.slot - 1, end=e.slot, rate=e.units)
                    for e in entries
                ]
                for entries in schedule.machines
            ],
        )

    @classmethod
    def from_migratory(cls, schedule: MigratorySchedule, m: int) -> "ScheduleDocument":
        return cls(
            kind="pcsp",
            speed=fmt_rational(schedule.speed),
            completions=[fmt_rational(c) for c in schedule.completions],
            starts=[fmt_rational(s) for s in schedule.starts],
            machines=[
                [
                    SegmentPayload(job=j, start=seg.start, end=seg.end, rate=seg.rate)
                    for seg, j in timeline
                ]
                for timeline in schedule.machine_timelines(m)
            ],
        )

    def to_cossp(self) -> Schedule:
        machines = []
        for segs in self.machines:
            entries = []
            for seg in segs:
                start, end = parse_rational(seg.start), parse_rational(seg.end)
                if end.denominator != 1 or start != end - 1:
                    raise InstanceValidationError(
                        f"cossp segments must be unit slots, got ({seg.start}, {seg.end}]"
                    )
                units = parse_rational(seg.rate)
                if units.denominator != 1:
                    raise InstanceValidationError(f"fractional slot units {seg.rate}")
                entries.append(SlotEntry(slot=int(end), job=seg.job, units=int(units)))
            machines.append(tuple(entries))
        completions = []
        for c in self.completions:
            value = parse_rational(c)
            if value.denominator != 1:
                raise InstanceValidationError(f"fractional cossp completion {c}")
            completions.append(int(value))
        speed = parse_rational(self.speed)
        return Schedule(machines=tuple(machines), completions=tuple(completions), speed=int(speed))

    def to_migratory(self) -> MigratorySchedule:
        n = len(self.completions)
        per_job: List[List[Segment]] = [[] for _ in range(n)]
        for machine, segs in enumerate(self.machines):
            for seg in segs:
                if not 0 <= seg.job < n:
                    raise InstanceValidationError(f"segment for unknown job {seg.job}")
                per_job[seg.job].append(
                    Segment(
                        machine=machine,
                        start=parse_rational(seg.start),
                        end=parse_rational(seg.end),
                        rate=parse_rational(seg.rate),
                    )
                )
        starts = [parse_rational(s) for s in self.starts] if self.starts else [
            min((seg.start for seg in segs), default=parse_rational(self.completions[j]))
            for j, segs in enumerate(per_job)
        ]
        return MigratorySchedule(
            speed=parse_rational(self.speed),
            segments=tuple(tuple(sorted(segs, key=lambda s: (s.start, s.machine))) for segs in per_job),
            completions=tuple(parse_rational(c) for c in self.completions),
            starts=tuple(starts),
        )


class SolutionDocument(BaseModel):
    """Input of `check`: an instance together with a schedule for it."""
    instance: InstancePayload
    schedule: ScheduleDocument


# ── Reports ──────────────────────────────────────────────────────────────────

class Violation(BaseModel):
    code: str
    message: str
    job: Optional[int] = None
    machine: Optional[int] = None


class ValidationReport(BaseModel):
    ok: bool
    violations: List[Violation] = []

    @property
    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


class SolveReport(BaseModel):
    solver: str
    n: int
    m: int
    P: str
    cost: str
    lp_objective: str
    lp_bound: str
    ratio: Optional[float] = None
    speed: str = "1"
    rounds: int = 0
    details: Dict[str, Any] = {}


class OracleReport(BaseModel):
    kind: Literal["cossp", "pcsp"]
    cost: str
    completions: List[str]


class BenchRow(BaseModel):
    id: str
    n: int
    m: int
    P: str
    solver: str
    cost: str = ""
    lp_bound: str = ""
    ratio: str = ""
    speed: str = ""
    ms: int = 0
    status: str = "ok"

    model_config = {"from_attributes": True}
