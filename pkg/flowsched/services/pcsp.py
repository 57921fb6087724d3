"""
Precedence-constrained pipeline on identical machines with speed augmentation.

time-indexed LP → half-point completions C → list scheduling at speed α on
half sizes → doubled rates (migratory, speed 2α) → one machine per job via
per-machine EDF at the smallest speed factor that fits.

List scheduling runs in exact rational time.
"""
from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from flowsched.config import Settings, get_settings
from flowsched.exceptions import (
    InstanceValidationError,
    LpSolveError,
    NoFeasibleSpeedError,
)
from flowsched.models import (
    DelayCost,
    MigratorySchedule,
    Number,
    PcspInstance,
    PcspJob,
    Segment,
    eval_cost,
    total_cost,
)
from flowsched.services.lp import LinearProgram, LpSolution, Sense, solve

logger = logging.getLogger(__name__)


# ── Preprocessing ────────────────────────────────────────────────────────────

def preprocess(instance: PcspInstance) -> PcspInstance:
    """Raise releases so that r_b >= r_a + p_a whenever a precedes b."""
    releases = [job.r for job in instance.jobs]
    for b in instance.topological_order:
        for a in instance.predecessors(b):
            releases[b] = max(releases[b], releases[a] + instance.jobs[a].p)
    if releases == [job.r for job in instance.jobs]:
        return instance
    jobs = tuple(PcspJob(p=job.p, r=r, cost=job.cost) for job, r in zip(instance.jobs, releases))
    return PcspInstance(m=instance.m, jobs=jobs, edges=instance.edges)


def expand_chains(instance: PcspInstance) -> Tuple[PcspInstance, Tuple[int, ...]]:
    """
    Replace each job of size p > 1 by a chain of p unit jobs; only the last
    piece carries the cost. Returns the new instance and, per original job,
    the index of its last piece.
    """
    jobs: List[PcspJob] = []
    first: List[int] = []
    last: List[int] = []
    edges: List[Tuple[int, int]] = []
    for job in instance.jobs:
        pieces = max(1, job.p)
        start = len(jobs)
        for k in range(pieces):
            cost = job.cost if k == pieces - 1 else DelayCost.flow(0, job.r)
            jobs.append(PcspJob(p=min(job.p, 1), r=job.r, cost=cost))
            if k:
                edges.append((start + k - 1, start + k))
        first.append(start)
        last.append(len(jobs) - 1)
    for a, b in instance.edges:
        edges.append((last[a], first[b]))
    return PcspInstance(m=instance.m, jobs=tuple(jobs), edges=tuple(edges)), tuple(last)


def default_horizon(instance: PcspInstance) -> int:
    return max(job.r for job in instance.jobs) + max(1, sum(job.p for job in instance.jobs))


# ── Time-indexed LP ──────────────────────────────────────────────────────────

@dataclass
class PcspLp:
    lp: LinearProgram
    horizon: int
    x_index: Dict[Tuple[int, int], int]
    c_index: Tuple[int, ...]


@dataclass(frozen=True)
class PcspLpSolution:
    status: str
    x: Dict[Tuple[int, int], Number]
    c: Tuple[Number, ...]
    objective: Optional[Number]
    mode: str
    raw: LpSolution

    @property
    def optimal(self) -> bool:
        return self.raw.optimal

    def fractional_cost(self, instance: PcspInstance, j: int) -> Number:
        """Σ_t x_{j,t} g_j(t) / p_j."""
        p = instance.jobs[j].p
        if p == 0:
            return 0
        return sum(v * eval_cost(instance.jobs[j].cost, t) for (k, t), v in self.x.items() if k == j) / p


def build_time_indexed_lp(instance: PcspInstance, horizon: int) -> PcspLp:
    """Slot t is (t-1, t]; job j gets variables for slots r_j+1 .. horizon."""
    lp = LinearProgram()
    x_index: Dict[Tuple[int, int], int] = {}
    for j, job in enumerate(instance.jobs):
        if job.p == 0:
            continue
        for t in range(job.r + 1, horizon + 1):
            x_index[(j, t)] = lp.add_variable(
                f"x_{j}_{t}", 0, 1, Fraction(eval_cost(job.cost, t), job.p)
            )
    c_index = tuple(lp.add_variable(f"c_{j}", 0, None, 0) for j in range(instance.n))
    lp.constant = sum(eval_cost(job.cost, job.p) for job in instance.jobs)

    for j, job in enumerate(instance.jobs):
        if job.p == 0:
            continue
        slots = [x_index[(j, t)] for t in range(job.r + 1, horizon + 1)]
        lp.add_row({k: 1 for k in slots}, Sense.GE, job.p, name=f"service_{j}")
        coeffs = {c_index[j]: 1}
        for t in range(job.r + 1, horizon + 1):
            coeffs[x_index[(j, t)]] = -(Fraction(t, job.p) + Fraction(1, 2))
        lp.add_row(coeffs, Sense.GE, 0, name=f"completion_{j}")
    for t in range(1, horizon + 1):
        cols = {x_index[(j, t)]: 1 for j in range(instance.n) if (j, t) in x_index}
        if len(cols) > instance.m:
            lp.add_row(cols, Sense.LE, instance.m, name=f"capacity_{t}")
    for a, b in instance.edges:
        lp.add_row({c_index[b]: 1, c_index[a]: -1}, Sense.GE, instance.jobs[b].p,
                   name=f"prec_{a}_{b}")
    return PcspLp(lp, horizon, x_index, c_index)


def solve_time_indexed_lp(instance: PcspInstance, horizon: Optional[int] = None, *,
                          mode: Optional[str] = None,
                          settings: Optional[Settings] = None) -> PcspLpSolution:
    built = build_time_indexed_lp(instance, horizon or default_horizon(instance))
    sol = solve(built.lp, mode, settings)
    if not sol.optimal:
        return PcspLpSolution(sol.status.value, {}, (), None, sol.mode, sol)
    x = {key: sol.values[k] for key, k in built.x_index.items()}
    c = tuple(sol.values[k] for k in built.c_index)
    logger.info("time-indexed LP: %d vars, %d rows, objective %s (%s)",
                built.lp.num_vars, len(built.lp.rows), sol.objective, sol.mode)
    return PcspLpSolution(sol.status.value, x, c, sol.objective, sol.mode, sol)


def extract_halfpoint_completions(solution: PcspLpSolution, instance: PcspInstance,
                                  tol: Optional[float] = None) -> List[int]:
    """Earliest slot by which half of each job is processed; zero-size jobs follow predecessors."""
    if tol is None:
        tol = 0 if solution.mode == "rational" else get_settings().lp_float_tolerance
    C = [job.r for job in instance.jobs]
    for j in instance.topological_order:
        job = instance.jobs[j]
        if job.p == 0:
            C[j] = max([job.r] + [C[a] for a in instance.predecessors(j)])
            continue
        half = Fraction(job.p, 2)
        cumulative: Number = 0
        for t in sorted(t for (k, t) in solution.x if k == j):
            cumulative += solution.x[(j, t)]
            if cumulative >= half - tol:
                C[j] = t
                break
        else:
            raise InstanceValidationError(f"job {j} never reaches half its size in the LP solution")
    return C


def lift_completions(instance: PcspInstance, C: Sequence[int]) -> List[int]:
    lifted = list(C)
    for j in instance.topological_order:
        for a in instance.predecessors(j):
            lifted[j] = max(lifted[j], lifted[a])
    return lifted


@dataclass(frozen=True)
class IntervalCheck:
    ok: bool
    witness: Optional[Tuple[Fraction, Fraction]] = None
    lhs: Fraction = Fraction(0)
    rhs: Fraction = Fraction(0)


def check_interval_property(instance: PcspInstance, C: Sequence[Number]) -> IntervalCheck:
    """
    For a < b over {r_j, r_j + p'_j, C_j}:
    Σ_{C_j <= b, r_j + p'_j > a} min(p'_j, r_j + p'_j - a) <= 2·m·(b - a), p' = p/2.
    """
    half = [Fraction(job.p, 2) for job in instance.jobs]
    events = sorted({Fraction(x) for j, job in enumerate(instance.jobs)
                     for x in (job.r, job.r + half[j], C[j])})
    for ai, a in enumerate(events):
        for b in events[ai + 1:]:
            lhs = sum(
                (min(half[j], job.r + half[j] - a)
                 for j, job in enumerate(instance.jobs)
                 if C[j] <= b and job.r + half[j] > a),
                Fraction(0),
            )
            rhs = 2 * instance.m * (b - a)
            if lhs > rhs:
                return IntervalCheck(False, (a, b), lhs, rhs)
    return IntervalCheck(True)


# ── List scheduling ──────────────────────────────────────────────────────────

class _Timeline:
    """Piecewise-constant machine occupancy over [0, inf)."""

    def __init__(self, m: int, end: Fraction) -> None:
        self.m = m
        self.starts: List[Fraction] = [Fraction(0)]
        self.ends: List[Fraction] = [end]
        self.busy: List[set] = [set()]

    def _extend(self, length: Fraction) -> None:
        self.starts.append(self.ends[-1])
        self.ends.append(self.ends[-1] + max(length, Fraction(1)))
        self.busy.append(set())

    def split(self, t: Fraction) -> int:
        """Index of the piece starting at t, splitting one if needed."""
        while t >= self.ends[-1]:
            self._extend(t - self.ends[-1] + 1)
        idx = bisect.bisect_right(self.starts, t) - 1
        if self.starts[idx] == t:
            return idx
        self.starts.insert(idx + 1, t)
        self.ends.insert(idx + 1, self.ends[idx])
        self.busy.insert(idx + 1, set(self.busy[idx]))
        self.ends[idx] = t
        return idx + 1

    def occupy(self, start: Fraction, need: Fraction, rate: Fraction) -> Tuple[List[Segment], Fraction]:
        """Take *need* time of non-full capacity from *start*; returns pieces and end time."""
        segments: List[Segment] = []
        if need == 0:
            return segments, start
        idx = self.split(start)
        remaining = need
        end = start
        while remaining > 0:
            if idx == len(self.starts):
                self._extend(remaining)
            if len(self.busy[idx]) < self.m:
                length = self.ends[idx] - self.starts[idx]
                if length > remaining:
                    self.split(self.starts[idx] + remaining)
                machine = min(set(range(self.m)) - self.busy[idx])
                self.busy[idx].add(machine)
                seg_start, seg_end = self.starts[idx], self.ends[idx]
                if segments and segments[-1].machine == machine and segments[-1].end == seg_start:
                    segments[-1] = Segment(machine, segments[-1].start, seg_end, rate)
                else:
                    segments.append(Segment(machine, seg_start, seg_end, rate))
                remaining -= seg_end - seg_start
                end = seg_end
            idx += 1
        return segments, end


def list_order(instance: PcspInstance, C: Sequence[Number]) -> List[int]:
    """Non-decreasing C, ties broken by topological position."""
    position = {j: k for k, j in enumerate(instance.topological_order)}
    return sorted(range(instance.n), key=lambda j: (C[j], position[j]))


def list_schedule(instance: PcspInstance, order: Sequence[int], alpha: Number = 3,
                  truncated: Optional[Sequence[Number]] = None) -> MigratorySchedule:
    """
    Jobs in *order*: S~_j = max(r_j, predecessors' C~); C~_j is reached after
    p'_j/α of non-full time, during which j runs at rate α on the lowest free
    machine. Default p'_j = p_j / 2.
    """
    alpha = Fraction(alpha)
    sizes = [Fraction(x) for x in truncated] if truncated is not None else [
        Fraction(job.p, 2) for job in instance.jobs
    ]
    need = [s / alpha for s in sizes]
    horizon = max(job.r for job in instance.jobs) + 2 * sum(need, Fraction(0)) + 1
    timeline = _Timeline(instance.m, Fraction(horizon))

    starts: List[Optional[Fraction]] = [None] * instance.n
    ends: List[Optional[Fraction]] = [None] * instance.n
    segments: List[Tuple[Segment, ...]] = [()] * instance.n
    for j in order:
        preds = instance.predecessors(j)
        if any(ends[a] is None for a in preds):
            raise InstanceValidationError(f"list order places job {j} before a predecessor")
        start = max([Fraction(instance.jobs[j].r)] + [ends[a] for a in preds])
        segs, end = timeline.occupy(start, need[j], alpha)
        starts[j], ends[j], segments[j] = start, end, tuple(segs)
        logger.debug("list: job %d window (%s, %s] in %d piece(s)", j, start, end, len(segs))
    if any(e is None for e in ends):
        raise InstanceValidationError("list order does not name every job")
    return MigratorySchedule(alpha, tuple(segments), tuple(ends), tuple(starts))


def scale_rates(schedule: MigratorySchedule, factor: Number) -> MigratorySchedule:
    factor = Fraction(factor)
    return MigratorySchedule(
        schedule.speed * factor,
        tuple(tuple(Segment(s.machine, s.start, s.end, s.rate * factor) for s in segs)
              for segs in schedule.segments),
        schedule.completions,
        schedule.starts,
    )


# ── Analysis of list schedules ───────────────────────────────────────────────

def _progress(segments: Sequence[Segment], t: Fraction) -> Fraction:
    return sum((s.rate * min(max(t - s.start, 0), s.end - s.start) for s in segments), Fraction(0))


def progress_potential(instance: PcspInstance, schedule: MigratorySchedule, t: Number) -> Fraction:
    """f(t) = min{t, min over ready unfinished j of r_j + p_j(t)}."""
    t = Fraction(t)
    value = t
    for j, job in enumerate(instance.jobs):
        if schedule.starts[j] < t <= schedule.completions[j]:
            value = min(value, job.r + _progress(schedule.segments[j], t))
    return value


def _event_times(instance: PcspInstance, schedule: MigratorySchedule) -> List[Fraction]:
    times = {Fraction(0)}
    times.update(Fraction(job.r) for job in instance.jobs)
    times.update(schedule.starts)
    times.update(schedule.completions)
    for segs in schedule.segments:
        for s in segs:
            times.update((s.start, s.end))
    return sorted(times)


def potential_profile(instance: PcspInstance, schedule: MigratorySchedule) -> List[Tuple[Fraction, Fraction]]:
    """(t, f(t)) at every event time and at each midpoint between events."""
    events = _event_times(instance, schedule)
    samples = list(events)
    samples += [(a + b) / 2 for a, b in zip(events, events[1:])]
    return [(t, progress_potential(instance, schedule, t)) for t in sorted(samples)]


def _rate_on(segments: Sequence[Segment], u: Fraction, v: Fraction) -> Fraction:
    mid = (u + v) / 2
    return sum((s.rate for s in segments if s.start < mid < s.end), Fraction(0))


def fresh_intervals(instance: PcspInstance, schedule: MigratorySchedule) -> List[Tuple[Fraction, Fraction]]:
    """Maximal closed intervals of fresh points (f(t) = t) up to the last completion."""
    events = _event_times(instance, schedule)
    found: List[Tuple[Fraction, Fraction]] = [(Fraction(0), Fraction(0))]
    for u, v in zip(events, events[1:]):
        lo, hi = u, v
        mid = (u + v) / 2
        for j, job in enumerate(instance.jobs):
            if not (schedule.starts[j] < mid <= schedule.completions[j]):
                continue
            # h(t) = r_j + p_j(u) + rate (t - u) - t on (u, v]
            base = job.r + _progress(schedule.segments[j], u) - u
            slope = _rate_on(schedule.segments[j], u, v) - 1
            if slope == 0:
                if base < 0:
                    lo, hi = v, u
            elif slope > 0:
                lo = max(lo, u - base / slope)
            else:
                hi = min(hi, u - base / slope)
        if lo <= hi:
            lo = max(lo, u)
            if found and found[-1][1] >= lo:
                found[-1] = (found[-1][0], max(found[-1][1], hi))
            else:
                found.append((lo, hi))
    return found


def _idle_length(schedule: MigratorySchedule, m: int, a: Fraction, b: Fraction) -> Fraction:
    cuts = {a, b}
    for segs in schedule.segments:
        for s in segs:
            for x in (s.start, s.end):
                if a < x < b:
                    cuts.add(x)
    cuts = sorted(cuts)
    idle = Fraction(0)
    for u, v in zip(cuts, cuts[1:]):
        mid = (u + v) / 2
        running = sum(1 for segs in schedule.segments for s in segs if s.start < mid < s.end)
        if running < m:
            idle += v - u
    return idle


def idle_volume_violations(instance: PcspInstance, schedule: MigratorySchedule,
                           alpha: Number) -> List[Tuple[Fraction, Fraction, Fraction]]:
    """Gaps (a, b) between fresh points whose idle length exceeds (b - a)/α."""
    alpha = Fraction(alpha)
    fresh = fresh_intervals(instance, schedule)
    out = []
    for (_, a), (b, _) in zip(fresh, fresh[1:]):
        idle = _idle_length(schedule, instance.m, a, b)
        if idle > (b - a) / alpha:
            out.append((a, b, idle))
    return out


# ── Migratory and non-migratory schedules ────────────────────────────────────

@dataclass(frozen=True)
class MigratoryRun:
    instance: PcspInstance              # after preprocessing
    lp: PcspLpSolution
    halfpoints: Tuple[int, ...]
    lifted: Tuple[int, ...]
    order: Tuple[int, ...]
    listed: MigratorySchedule           # speed α on half sizes
    schedule: MigratorySchedule         # speed 2α on full sizes


def migratory_schedule(instance: PcspInstance, *, alpha: Optional[Number] = None,
                       horizon: Optional[int] = None, mode: Optional[str] = None,
                       settings: Optional[Settings] = None) -> MigratoryRun:
    settings = settings or get_settings()
    alpha = Fraction(alpha if alpha is not None else settings.pcsp_alpha)
    pre = preprocess(instance.validate())
    lp = solve_time_indexed_lp(pre, horizon, mode=mode, settings=settings)
    if not lp.optimal:
        raise LpSolveError(lp.status)
    tol = 0 if lp.mode == "rational" else settings.lp_float_tolerance
    C = extract_halfpoint_completions(lp, pre, tol)
    lifted = lift_completions(pre, C)
    order = list_order(pre, lifted)
    listed = list_schedule(pre, order, alpha)
    schedule = scale_rates(listed, 2)
    late = [j for j in range(pre.n) if schedule.completions[j] > lifted[j]]
    if late:
        logger.warning("list schedule finishes %d job(s) after their lifted half-points", len(late))
    logger.info("migratory schedule at speed %s, makespan %s",
                schedule.speed, max(schedule.completions))
    return MigratoryRun(pre, lp, tuple(C), tuple(lifted), tuple(order), listed, schedule)


def _edf_single_machine(
    jobs: Sequence[Tuple[int, Fraction, Fraction, Fraction]], speed: Fraction, machine: int
) -> Optional[Dict[int, Tuple[List[Segment], Fraction]]]:
    """Preemptive EDF of (job, release, deadline, work); None if a deadline is missed."""
    pending = sorted(jobs, key=lambda x: (x[1], x[0]))
    remaining = {j: w for j, _, _, w in jobs}
    deadline = {j: d for j, _, d, _ in jobs}
    out: Dict[int, Tuple[List[Segment], Fraction]] = {}
    active: List[int] = []
    t = pending[0][1] if pending else Fraction(0)
    k = 0
    while k < len(pending) or active:
        while k < len(pending) and pending[k][1] <= t:
            j = pending[k][0]
            k += 1
            if remaining[j] == 0:
                if t > deadline[j]:
                    return None
                out[j] = ([], pending[k - 1][1])
            else:
                active.append(j)
                out[j] = ([], t)
        if not active:
            if k == len(pending):
                break
            t = pending[k][1]
            continue
        j = min(active, key=lambda x: (deadline[x], x))
        finish = t + remaining[j] / speed
        end = min(finish, pending[k][1]) if k < len(pending) else finish
        segs = out[j][0]
        if segs and segs[-1].end == t:
            segs[-1] = Segment(machine, segs[-1].start, end, speed)
        else:
            segs.append(Segment(machine, t, end, speed))
        remaining[j] -= (end - t) * speed
        t = end
        if remaining[j] == 0:
            active.remove(j)
            if t > deadline[j]:
                return None
            out[j] = (segs, t)
    return out


@dataclass(frozen=True)
class NonMigratoryResult:
    schedule: MigratorySchedule
    achieved_speed: Fraction
    factor: Fraction
    assignment: Tuple[int, ...]


def _assign_machines(mig: MigratorySchedule, work: Sequence[Fraction], m: int) -> List[int]:
    assignment = [0] * mig.n
    placed: List[List[int]] = [[] for _ in range(m)]
    order = sorted(range(mig.n), key=lambda j: (mig.starts[j], mig.completions[j], j))
    for j in order:
        used = {s.machine for s in mig.segments[j]}
        if len(used) == 1:
            machine = used.pop()
        else:
            def load(i: int) -> Fraction:
                return sum((work[k] for k in placed[i]
                            if max(mig.starts[k], mig.starts[j]) < min(mig.completions[k], mig.completions[j])),
                           Fraction(0))
            machine = min(range(m), key=lambda i: (load(i), i))
        assignment[j] = machine
        placed[machine].append(j)
    return assignment


def make_nonmigratory(mig: MigratorySchedule, instance: PcspInstance, *,
                      sizes: Optional[Sequence[Number]] = None,
                      settings: Optional[Settings] = None) -> NonMigratoryResult:
    """
    Keep each job inside its window (S~_j, C~_j] on a single machine; tries
    speed factors over the input speed until per-machine EDF meets every window.
    """
    settings = settings or get_settings()
    work = [Fraction(x) for x in sizes] if sizes is not None else [Fraction(job.p) for job in instance.jobs]
    assignment = _assign_machines(mig, work, instance.m)
    for factor_f in settings.speed_grid:
        factor = Fraction(factor_f).limit_denominator(1000)
        speed = mig.speed * factor
        segments: List[Tuple[Segment, ...]] = [()] * mig.n
        completions: List[Fraction] = list(mig.starts)
        feasible = True
        for i in range(instance.m):
            mine = [(j, mig.starts[j], mig.completions[j], work[j])
                    for j in range(mig.n) if assignment[j] == i]
            result = _edf_single_machine(mine, speed, i)
            if result is None:
                feasible = False
                break
            for j, (segs, done) in result.items():
                segments[j] = tuple(segs)
                completions[j] = done
        if feasible:
            if factor > 1:
                logger.info("non-migratory conversion needed speed factor %s", factor)
            return NonMigratoryResult(
                MigratorySchedule(speed, tuple(segments), tuple(completions), tuple(mig.starts)),
                speed, factor, tuple(assignment),
            )
    raise NoFeasibleSpeedError(f"no speed factor up to {settings.speed_max} fits every window")


# ── Pipeline ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PcspResult:
    instance: PcspInstance              # the instance the schedule refers to
    schedule: MigratorySchedule
    cost: Number
    lp_objective: Number
    lp_bound: Number
    speed: Fraction
    factor: Fraction
    run: MigratoryRun
    stats: Dict[str, object] = field(default_factory=dict)


def solve_pcsp(instance: PcspInstance, *, alpha: Optional[Number] = None,
               expand: bool = False, horizon: Optional[int] = None,
               mode: Optional[str] = None, settings: Optional[Settings] = None) -> PcspResult:
    settings = settings or get_settings()
    work = instance.validate()
    if expand:
        work, _ = expand_chains(work)
        logger.info("chain expansion: %d jobs -> %d unit jobs", instance.n, work.n)
    run = migratory_schedule(work, alpha=alpha, horizon=horizon, mode=mode, settings=settings)
    converted = make_nonmigratory(run.schedule, run.instance, settings=settings)
    cost = total_cost(work, converted.schedule.completions)
    interval_ok = check_interval_property(run.instance, run.halfpoints).ok
    stats = {
        "interval_property": interval_ok,
        "completion_lemma": all(run.schedule.completions[j] <= run.lifted[j] for j in range(work.n)),
        "migrating_jobs": sum(1 for segs in run.schedule.segments if len({s.machine for s in segs}) > 1),
    }
    logger.info("PCSP solved: n=%d m=%d cost=%s lp=%s speed=%s",
                work.n, work.m, cost, run.lp.objective, converted.achieved_speed)
    return PcspResult(work, converted.schedule, cost, run.lp.objective, run.lp.objective,
                      converted.achieved_speed, converted.factor, run, stats)
