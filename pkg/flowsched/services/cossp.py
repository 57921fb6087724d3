"""
Concurrent open-shop pipeline for general delay costs.

breakpoints → canonical points → rectangle cover (PR2C) → knapsack-cover LP
→ scaling, heavy/light split → 4-D unit cover and 3-D multi-cover →
selected rectangles → deadlines → EDF schedule.

Machines are 0-based; geometric levels put machine i at 2(i+1).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from flowsched.config import Settings, get_settings
from flowsched.exceptions import (
    LpSolveError,
    ResidualUncoveredError,
    RoundingAssertionError,
)
from flowsched.models import CosspInstance, Schedule, eval_cost, latest_time_within_budget, total_cost
from flowsched.services.cover import (
    Box,
    CoverInstance,
    CoverObject,
    CoverPoint,
    CoverSelection,
    closed,
    half_open,
    solve_cover,
)
from flowsched.services.edf import Interval, build_edf_schedule, excess
from flowsched.services.lp import LinearProgram, LpSolution, Row, Sense, solve_with_rows

logger = logging.getLogger(__name__)


# ── Breakpoints ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Breakpoints:
    """t_{j,q} for q in [-1, qmax_j]; t_{j,-2} = r_j."""
    horizon: int
    releases: Tuple[int, ...]
    times: Tuple[Tuple[int, ...], ...]     # times[j][q + 1]

    def qmax(self, j: int) -> int:
        return len(self.times[j]) - 2

    def t(self, j: int, q: int) -> int:
        if q == -2:
            return self.releases[j]
        return self.times[j][q + 1]

    def q_range(self, j: int) -> range:
        return range(-1, self.qmax(j) + 1)

    def q_at(self, j: int, t: int) -> Optional[int]:
        """The q with t in (t_{j,q-1}, t_{j,q}], or None outside (r_j, t_{j,qmax}]."""
        for q in self.q_range(j):
            if self.t(j, q - 1) < t <= self.t(j, q):
                return q
        return None


def _ceil_log2(v: int) -> int:
    return (v - 1).bit_length()


def breakpoints(instance: CosspInstance) -> Breakpoints:
    H = instance.horizon
    times = []
    for job in instance.jobs:
        g_h = eval_cost(job.cost, H)
        qmax = max(-1, _ceil_log2(g_h)) if g_h >= 1 else -1
        row = []
        for q in range(-1, qmax + 1):
            t = None
            if H > job.r:
                t = latest_time_within_budget(job.cost, Fraction(2) ** q, job.r, H)
            row.append(job.r if t is None else t)
        times.append(tuple(row))
    return Breakpoints(H, tuple(job.r for job in instance.jobs), tuple(times))


# ── PR2C ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Pr2cPoint:
    machine: int
    t1: int
    t2: int
    demand: int


@dataclass(frozen=True)
class Rectangle:
    """Covers (t1, t2) iff t1 <= r and lo <= t2 < hi; its deadline is hi."""
    id: int
    job: int
    q: int
    r: int
    lo: int
    hi: int
    cost: int
    capacities: Tuple[int, ...]

    def covers(self, t1: int, t2: int) -> bool:
        return t1 <= self.r and self.lo <= t2 < self.hi

    def covers_point(self, p: Pr2cPoint) -> bool:
        return self.covers(p.t1, p.t2)


@dataclass(frozen=True)
class Pr2cInstance:
    instance: CosspInstance
    bp: Breakpoints
    points: Tuple[Tuple[Pr2cPoint, ...], ...]      # per machine
    rectangles: Tuple[Rectangle, ...]
    needs_rectangle: Tuple[int, ...]               # jobs with positive workload

    @property
    def all_points(self) -> List[Pr2cPoint]:
        return [p for pts in self.points for p in pts]

    def covering(self, p: Pr2cPoint) -> List[Rectangle]:
        return [r for r in self.rectangles if r.covers_point(p) and r.capacities[p.machine] > 0]

    def supplied(self, p: Pr2cPoint, selection: FrozenSet[int]) -> int:
        return sum(r.capacities[p.machine] for r in self.rectangles
                   if r.id in selection and r.covers_point(p))


def canonical_points(instance: CosspInstance, bp: Breakpoints) -> Tuple[Tuple[Pr2cPoint, ...], ...]:
    releases = sorted({job.r for job in instance.jobs})
    ends = set(releases)
    for j in range(instance.n):
        for q in bp.q_range(j):
            ends.add(bp.t(j, q))
            ends.add(bp.t(j, q) + 1)
    ends_sorted = sorted(ends)
    per_machine = []
    for i in range(instance.m):
        pts = []
        for t1 in releases:
            for t2 in ends_sorted:
                if t2 < t1:
                    continue
                d = excess(instance, i, Interval(t1, t2))
                if d > 0:
                    pts.append(Pr2cPoint(i, t1, t2, d))
        per_machine.append(tuple(pts))
    return tuple(per_machine)


def build_pr2c(instance: CosspInstance, bp: Optional[Breakpoints] = None) -> Pr2cInstance:
    bp = bp or breakpoints(instance)
    rects = []
    for j, job in enumerate(instance.jobs):
        if sum(job.p) == 0:
            continue
        for q in bp.q_range(j):
            lo, hi = bp.t(j, q - 1), bp.t(j, q)
            if lo >= hi:
                continue
            cost = 2 ** q if q >= 0 else 0
            rects.append(Rectangle(len(rects), j, q, job.r, lo, hi, cost, tuple(job.p)))
    points = canonical_points(instance, bp)
    needs = tuple(j for j, job in enumerate(instance.jobs) if sum(job.p) > 0)
    logger.info("PR2C: %d points over %d machines, %d rectangles",
                sum(len(p) for p in points), instance.m, len(rects))
    return Pr2cInstance(instance, bp, points, tuple(rects), needs)


# ── Knapsack-cover LP ────────────────────────────────────────────────────────

def kc_row(pr2c: Pr2cInstance, p: Pr2cPoint, picked: FrozenSet[int]) -> Optional[Row]:
    """Σ_{r ∋ p, r ∉ picked} min(c, residual) x_r >= residual, or None if met."""
    residual = p.demand - pr2c.supplied(p, picked)
    if residual <= 0:
        return None
    coeffs = {
        r.id: min(r.capacities[p.machine], residual)
        for r in pr2c.covering(p)
        if r.id not in picked
    }
    return Row.of(coeffs, Sense.GE, residual,
                  name=f"kc_m{p.machine}_{p.t1}_{p.t2}_s{len(picked)}")


def build_kc_lp(pr2c: Pr2cInstance) -> LinearProgram:
    lp = LinearProgram()
    for r in pr2c.rectangles:
        lp.add_variable(f"x_{r.job}_{r.q}", 0, 1, r.cost)
    for p in pr2c.all_points:
        row = kc_row(pr2c, p, frozenset())
        if row is not None:
            lp.rows.append(row)
    for j in pr2c.needs_rectangle:
        ids = {r.id: 1 for r in pr2c.rectangles if r.job == j}
        lp.add_row(ids, Sense.GE, 1, name=f"job_{j}")
    return lp


def picked_set(pr2c: Pr2cInstance, x: Sequence, scale: int, tol: float = 1e-9) -> FrozenSet[int]:
    return frozenset(
        r.id for r in pr2c.rectangles if r.cost == 0 or scale * x[r.id] >= 1 - tol
    )


def _violated_kc_rows(pr2c: Pr2cInstance, x: Sequence, picked: FrozenSet[int],
                      tol: float) -> List[Row]:
    rows = []
    for p in pr2c.all_points:
        row = kc_row(pr2c, p, frozenset(r for r in picked if pr2c.rectangles[r].covers_point(p)))
        if row is not None and not row.satisfied(x, tol):
            rows.append(row)
    return rows


@dataclass(frozen=True)
class KcSolution:
    x: Tuple
    objective: object
    lp: LinearProgram
    rounds: int
    mode: str


def solve_kc_lp(pr2c: Pr2cInstance, *, lp: Optional[LinearProgram] = None,
                mode: Optional[str] = None, settings: Optional[Settings] = None) -> KcSolution:
    settings = settings or get_settings()
    lp = lp if lp is not None else build_kc_lp(pr2c)
    if not lp.names:
        return KcSolution((), 0, lp, 0, mode or settings.lp_mode)

    def separator(sol: LpSolution):
        picked = picked_set(pr2c, sol.values, settings.kc_scale)
        tol = 0 if sol.mode == "rational" else settings.lp_float_tolerance
        return _violated_kc_rows(pr2c, sol.values, picked, tol)

    sol = solve_with_rows(lp, separator, mode=mode, settings=settings)
    if not sol.optimal:
        raise LpSolveError(sol.status.value)
    logger.info("KC LP: objective %s after %d round(s), %d rows (%s)",
                sol.objective, sol.rounds, len(lp.rows), sol.mode)
    return KcSolution(sol.values, sol.objective, lp, sol.rounds, sol.mode)


# ── Rounding ─────────────────────────────────────────────────────────────────

def next_pow2(v: int) -> int:
    """Smallest power of two >= v (v >= 1)."""
    return 1 << (v - 1).bit_length()


def prev_pow2(v: int) -> int:
    """Largest power of two <= v, 0 for v = 0."""
    return 0 if v <= 0 else 1 << (v.bit_length() - 1)


@dataclass(frozen=True)
class ResidualPoint:
    point: Pr2cPoint
    picked: FrozenSet[int]          # S(p)
    residual: int
    d_tilde: int
    heavy: bool


@dataclass
class RoundingState:
    scaled: Tuple                                   # x' = scale · x
    picked: FrozenSet[int]                          # S
    c_tilde: Dict[Tuple[int, int], int]             # (machine, rect) -> rounded capacity
    c_tilde_min: Dict[int, int]                     # machine -> smallest positive c~
    heavy: List[ResidualPoint] = field(default_factory=list)
    light: List[ResidualPoint] = field(default_factory=list)
    missing_rows: List[Row] = field(default_factory=list)

    def rect_class(self, machine: int, rect_id: int) -> Optional[int]:
        c = self.c_tilde.get((machine, rect_id), 0)
        if c == 0:
            return None
        return c.bit_length() - self.c_tilde_min[machine].bit_length()


def classify_and_split(pr2c: Pr2cInstance, x: Sequence,
                       settings: Optional[Settings] = None, tol: Optional[float] = None) -> RoundingState:
    settings = settings or get_settings()
    if tol is None:
        tol = 0 if all(isinstance(v, (int, Fraction)) for v in x) else settings.lp_float_tolerance
    scale = settings.kc_scale
    scaled = tuple(scale * v for v in x)
    picked = picked_set(pr2c, x, scale)

    c_tilde: Dict[Tuple[int, int], int] = {}
    c_min: Dict[int, int] = {}
    for i in range(pr2c.instance.m):
        for r in pr2c.rectangles:
            c = prev_pow2(r.capacities[i])
            c_tilde[(i, r.id)] = c
            if c > 0:
                c_min[i] = min(c_min.get(i, c), c)
    state = RoundingState(scaled, picked, c_tilde, c_min)

    for p in pr2c.all_points:
        covering = pr2c.covering(p)
        s_p = frozenset(r.id for r in covering if r.id in picked)
        residual = p.demand - sum(r.capacities[p.machine] for r in covering if r.id in s_p)
        if residual <= 0:
            continue
        d_tilde = next_pow2(residual)
        outside = [r for r in covering if r.id not in s_p]
        big = sum(scaled[r.id] for r in outside if c_tilde[(p.machine, r.id)] >= d_tilde)
        rp_heavy = big >= 1 - tol
        rp = ResidualPoint(p, s_p, residual, d_tilde, rp_heavy)
        if rp_heavy:
            state.heavy.append(rp)
            continue
        small = sum(c_tilde[(p.machine, r.id)] * scaled[r.id]
                    for r in outside if c_tilde[(p.machine, r.id)] < d_tilde)
        if small < 2 * d_tilde - tol:
            row = kc_row(pr2c, p, s_p)
            if row is not None:
                state.missing_rows.append(row)
        state.light.append(rp)

    logger.info("rounding: |S|=%d heavy=%d light=%d missing-rows=%d",
                len(picked), len(state.heavy), len(state.light), len(state.missing_rows))
    return state


def round_kc_lp(pr2c: Pr2cInstance, *, mode: Optional[str] = None,
                settings: Optional[Settings] = None) -> Tuple[KcSolution, RoundingState]:
    """Solve and classify, feeding rows the light check misses back to the LP."""
    settings = settings or get_settings()
    lp = build_kc_lp(pr2c)
    for attempt in range(1, settings.kc_max_rounds + 1):
        sol = solve_kc_lp(pr2c, lp=lp, mode=mode, settings=settings)
        state = classify_and_split(pr2c, sol.x, settings)
        if not state.missing_rows:
            return sol, state
        known = {row.key for row in lp.rows}
        fresh = [row for row in state.missing_rows if row.key not in known]
        if not fresh:
            # Rows present but short only by float noise; the repair pass covers it.
            logger.warning("light check short on %d point(s) with all rows present",
                           len(state.missing_rows))
            return sol, state
        logger.warning("light check failed on %d point(s); re-solving (round %d)",
                       len(fresh), attempt)
        lp.rows.extend(fresh)
    raise RoundingAssertionError(
        f"light points still short after {settings.kc_max_rounds} rounds"
    )


# ── Geometric reductions ─────────────────────────────────────────────────────

def _level(machine: int) -> int:
    return 2 * (machine + 1)


HALF = Fraction(1, 2)


def build_hccp(pr2c: Pr2cInstance, state: RoundingState) -> CoverInstance:
    """4-D unit-demand cover for heavy points."""
    if not state.heavy:
        return CoverInstance(4)
    points = tuple(
        CoverPoint((_level(rp.point.machine) + HALF, rp.point.t1, rp.point.t2, rp.d_tilde),
                   1, tag=rp)
        for rp in state.heavy
    )
    objects = []
    for r in pr2c.rectangles:
        if r.id in state.picked:
            continue
        boxes = []
        for i in range(pr2c.instance.m):
            c = state.c_tilde[(i, r.id)]
            if c == 0:
                continue
            lvl = _level(i)
            boxes.append(Box((closed(lvl, lvl + 1), closed(0, r.r),
                              half_open(r.lo, r.hi), closed(0, c))))
        if boxes:
            objects.append(CoverObject(r.id, r.cost, tuple(boxes), tag=r.id))
    return CoverInstance(4, points, tuple(objects)).validate()


def gmcc_shift(pr2c: Pr2cInstance) -> int:
    return 2 * pr2c.bp.horizon


def build_gmcc(pr2c: Pr2cInstance, state: RoundingState) -> CoverInstance:
    """3-D multi-cover for light points, one shifted copy per capacity class."""
    if not state.light:
        return CoverInstance(3)
    T = gmcc_shift(pr2c)
    points = []
    for rp in state.light:
        i = rp.point.machine
        mass: Dict[int, object] = {}
        for r in pr2c.covering(rp.point):
            if r.id in rp.picked or r.id in state.picked:
                continue
            k = state.rect_class(i, r.id)
            if k is None:
                continue
            mass[k] = mass.get(k, 0) + state.scaled[r.id]
        for k in sorted(mass):
            e = int(mass[k] + 1e-9) if isinstance(mass[k], float) else int(mass[k])
            if e > 0:
                points.append(CoverPoint((_level(i) + HALF, k * T + rp.point.t1, rp.point.t2),
                                         e, tag=(rp, k)))
    objects = []
    for r in pr2c.rectangles:
        if r.id in state.picked:
            continue
        boxes = []
        for i in range(pr2c.instance.m):
            k = state.rect_class(i, r.id)
            if k is None:
                continue
            lvl = _level(i)
            boxes.append(Box((closed(lvl, lvl + 1), closed(k * T, k * T + r.r),
                              half_open(r.lo, r.hi))))
        if boxes:
            objects.append(CoverObject(r.id, r.cost, tuple(boxes), tag=r.id))
    return CoverInstance(3, tuple(points), tuple(objects)).validate()


# ── Assembly ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Selection:
    rectangles: FrozenSet[int]
    repaired: Tuple[int, ...] = ()
    fallback: Tuple[int, ...] = ()


def assemble_solution(pr2c: Pr2cInstance, state: RoundingState,
                      heavy_sel: CoverSelection, light_sel: CoverSelection) -> Selection:
    chosen = set(state.picked) | set(heavy_sel.objects) | set(light_sel.objects)

    repaired = []
    for p in pr2c.all_points:
        while pr2c.supplied(p, frozenset(chosen)) < p.demand:
            extra = [r for r in pr2c.covering(p) if r.id not in chosen]
            if not extra:
                raise ResidualUncoveredError(
                    f"machine {p.machine} point ({p.t1}, {p.t2}) short of demand {p.demand}"
                )
            r = min(extra, key=lambda r: (r.cost, r.id))
            chosen.add(r.id)
            repaired.append(r.id)
    if repaired:
        logger.warning("greedy repair added %d rectangle(s): %s", len(repaired), repaired)

    fallback = []
    for j in pr2c.needs_rectangle:
        if any(pr2c.rectangles[rid].job == j for rid in chosen):
            continue
        cheapest = min((r for r in pr2c.rectangles if r.job == j), key=lambda r: (r.cost, r.q))
        chosen.add(cheapest.id)
        fallback.append(cheapest.id)
    if fallback:
        logger.warning("cheapest-rectangle fallback for %d job(s)", len(fallback))
    return Selection(frozenset(chosen), tuple(repaired), tuple(fallback))


def deadlines_from_selection(pr2c: Pr2cInstance, selection: Selection) -> List[int]:
    deadlines = [job.r for job in pr2c.instance.jobs]
    for rid in selection.rectangles:
        r = pr2c.rectangles[rid]
        deadlines[r.job] = max(deadlines[r.job], r.hi)
    return deadlines


# ── Pipeline ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CosspResult:
    schedule: Schedule
    deadlines: Tuple[int, ...]
    cost: int
    lp_objective: object
    lp_bound: object
    ratio: float
    selection: Selection
    rounds: int
    stats: Dict[str, int]


def lp_lower_bound(lp_objective) -> object:
    """The rectangle IP costs at most 4·OPT, so LP/4 bounds OPT from below."""
    return lp_objective / 4


def solve_cossp(instance: CosspInstance, *, mode: Optional[str] = None,
                max_rounds: Optional[int] = None, cover_solver: Optional[str] = None,
                settings: Optional[Settings] = None) -> CosspResult:
    settings = settings or get_settings()
    if max_rounds is not None:
        settings = settings.model_copy(update={"lp_max_iterations": max_rounds})
    cover_solver = cover_solver or settings.cover_solver
    instance.validate()

    pr2c = build_pr2c(instance)
    kc, state = round_kc_lp(pr2c, mode=mode, settings=settings)
    hccp = build_hccp(pr2c, state)
    gmcc = build_gmcc(pr2c, state)
    heavy_sel = solve_cover(hccp, cover_solver, settings.cover_exact_object_limit)
    light_sel = solve_cover(gmcc, cover_solver, settings.cover_exact_object_limit)
    selection = assemble_solution(pr2c, state, heavy_sel, light_sel)

    deadlines = deadlines_from_selection(pr2c, selection)
    schedule = build_edf_schedule(instance, deadlines)
    cost = total_cost(instance, schedule.completions)
    lp_obj = kc.objective
    bound = lp_lower_bound(lp_obj)
    if bound > 0:
        ratio = float(Fraction(cost) / Fraction(bound))
    else:
        ratio = 1.0 if cost == 0 else float("inf")
    stats = {
        "points": len(pr2c.all_points),
        "rectangles": len(pr2c.rectangles),
        "picked": len(state.picked),
        "heavy": len(state.heavy),
        "light": len(state.light),
        "hccp_objects": len(hccp.objects),
        "gmcc_points": len(gmcc.points),
        "selected": len(selection.rectangles),
        "repaired": len(selection.repaired),
        "fallback": len(selection.fallback),
    }
    logger.info("COSSP solved: n=%d m=%d cost=%s lp=%s ratio=%.4f",
                instance.n, instance.m, cost, lp_obj, ratio)
    return CosspResult(schedule, tuple(deadlines), cost, lp_obj, bound, ratio,
                       selection, kc.rounds, stats)
