"""
Weighted geometric multi-cover over multi-box objects.

An object covers a point when one of its boxes contains it; it contributes
at most one unit towards that point's demand.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from flowsched.exceptions import (
    CoverDimensionError,
    InstanceValidationError,
    LimitExceededError,
    UncoverablePointError,
)

logger = logging.getLogger(__name__)

Coord = Union[int, Fraction]


@dataclass(frozen=True)
class Range:
    lo: Coord
    hi: Coord
    lo_closed: bool = True
    hi_closed: bool = True

    def contains(self, v: Coord) -> bool:
        above = v >= self.lo if self.lo_closed else v > self.lo
        below = v <= self.hi if self.hi_closed else v < self.hi
        return above and below

    @property
    def empty(self) -> bool:
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed)
        return self.hi < self.lo


def closed(lo: Coord, hi: Coord) -> Range:
    return Range(lo, hi)


def half_open(lo: Coord, hi: Coord) -> Range:
    """[lo, hi)"""
    return Range(lo, hi, True, False)


@dataclass(frozen=True)
class Box:
    ranges: Tuple[Range, ...]

    @property
    def dimension(self) -> int:
        return len(self.ranges)

    @property
    def empty(self) -> bool:
        return any(r.empty for r in self.ranges)

    def contains(self, coords: Sequence[Coord]) -> bool:
        return all(r.contains(c) for r, c in zip(self.ranges, coords))


@dataclass(frozen=True)
class CoverPoint:
    coords: Tuple[Coord, ...]
    demand: int = 1
    tag: Any = None


@dataclass(frozen=True)
class CoverObject:
    id: int
    weight: Coord
    boxes: Tuple[Box, ...]
    tag: Any = None


@dataclass(frozen=True)
class CoverInstance:
    dimension: int
    points: Tuple[CoverPoint, ...] = ()
    objects: Tuple[CoverObject, ...] = ()

    def validate(self) -> "CoverInstance":
        for p in self.points:
            if len(p.coords) != self.dimension:
                raise CoverDimensionError(f"point {p.coords} is not {self.dimension}-dimensional")
            if p.demand < 1:
                raise InstanceValidationError(f"point {p.coords} has demand {p.demand}")
        ids = set()
        for obj in self.objects:
            if obj.weight <= 0:
                raise InstanceValidationError(f"object {obj.id} has weight {obj.weight}")
            if obj.id in ids:
                raise InstanceValidationError(f"duplicate object id {obj.id}")
            ids.add(obj.id)
            for box in obj.boxes:
                if box.dimension != self.dimension:
                    raise CoverDimensionError(f"object {obj.id} has a {box.dimension}-D box")
        return self

    def object(self, oid: int) -> CoverObject:
        return next(o for o in self.objects if o.id == oid)


@dataclass(frozen=True)
class CoverSelection:
    objects: Tuple[int, ...]
    weight: Coord

    @classmethod
    def of(cls, instance: CoverInstance, ids: Iterable[int]) -> "CoverSelection":
        chosen = tuple(sorted(set(ids)))
        by_id = {o.id: o for o in instance.objects}
        return cls(chosen, sum((by_id[i].weight for i in chosen), Fraction(0)))


@dataclass(frozen=True)
class CoverReport:
    ok: bool
    shortfalls: Tuple[Tuple[int, int, int], ...] = ()   # (point index, covered, demand)


def contains(obj: CoverObject, point: Union[CoverPoint, Sequence[Coord]]) -> bool:
    coords = point.coords if isinstance(point, CoverPoint) else tuple(point)
    for box in obj.boxes:
        if box.dimension != len(coords):
            raise CoverDimensionError(
                f"object {obj.id} has {box.dimension}-D boxes, point is {len(coords)}-D"
            )
    return any(box.contains(coords) for box in obj.boxes)


def coverage_matrix(instance: CoverInstance) -> np.ndarray:
    """Boolean (points × objects) incidence."""
    M = np.zeros((len(instance.points), len(instance.objects)), dtype=bool)
    for a, p in enumerate(instance.points):
        for b, obj in enumerate(instance.objects):
            M[a, b] = contains(obj, p)
    return M


def _demands(instance: CoverInstance) -> np.ndarray:
    return np.array([p.demand for p in instance.points], dtype=np.int64)


def _check_coverable(instance: CoverInstance, M: np.ndarray) -> None:
    counts = M.sum(axis=1) if M.size else np.zeros(len(instance.points), dtype=np.int64)
    for a, p in enumerate(instance.points):
        if counts[a] < p.demand:
            raise UncoverablePointError(
                p.coords, f"point {p.coords} needs {p.demand} objects, {int(counts[a])} cover it"
            )


def greedy_multicover(instance: CoverInstance) -> CoverSelection:
    instance.validate()
    if not instance.points:
        return CoverSelection((), Fraction(0))
    M = coverage_matrix(instance)
    _check_coverable(instance, M)
    residual = _demands(instance)
    chosen: list[int] = []
    available = np.ones(len(instance.objects), dtype=bool)
    while residual.any():
        gains = (M & (residual > 0)[:, None]).sum(axis=0)
        best, best_score = None, None
        for b, obj in enumerate(instance.objects):
            if not available[b] or gains[b] == 0:
                continue
            score = Fraction(int(gains[b])) / Fraction(obj.weight)
            if best_score is None or score > best_score or (
                score == best_score and obj.id < instance.objects[best].id
            ):
                best, best_score = b, score
        available[best] = False
        chosen.append(instance.objects[best].id)
        residual = residual - (M[:, best] & (residual > 0))
    selection = CoverSelection.of(instance, chosen)
    logger.debug("greedy cover: %d objects, weight %s", len(selection.objects), selection.weight)
    return selection


def exact_multicover(instance: CoverInstance, object_limit: int = 22) -> CoverSelection:
    """
    Branch and bound. Branches on the unmet point with the fewest remaining
    candidates; the bound charges each unmet unit its cheapest per-unit price.
    """
    instance.validate()
    if len(instance.objects) > object_limit:
        raise LimitExceededError(
            f"{len(instance.objects)} objects exceed the exact-cover limit {object_limit}"
        )
    if not instance.points:
        return CoverSelection((), Fraction(0))
    M = coverage_matrix(instance)
    _check_coverable(instance, M)
    weights = [Fraction(o.weight) for o in instance.objects]
    order = sorted(range(len(instance.objects)), key=lambda b: instance.objects[b].id)

    incumbent = greedy_multicover(instance)
    best = {"weight": incumbent.weight,
            "cols": [b for b in order if instance.objects[b].id in set(incumbent.objects)]}

    def bound(residual: np.ndarray, free: np.ndarray) -> Fraction:
        active = residual > 0
        k = (M[active][:, free]).sum(axis=0)
        total = Fraction(0)
        free_cols = np.flatnonzero(free)
        for a in np.flatnonzero(active):
            prices = [weights[b] / int(k[c]) for c, b in enumerate(free_cols) if M[a, b] and k[c] > 0]
            if not prices:
                return None
            total += int(residual[a]) * min(prices)
        return total

    def search(residual: np.ndarray, free: np.ndarray, cols: list[int], weight: Fraction) -> None:
        if not (residual > 0).any():
            if weight < best["weight"]:
                best["weight"], best["cols"] = weight, list(cols)
            return
        lb = bound(residual, free)
        if lb is None or weight + lb >= best["weight"]:
            return
        unmet = np.flatnonzero(residual > 0)
        cand_counts = (M[unmet][:, free]).sum(axis=1)
        a = int(unmet[int(np.argmin(cand_counts))])
        cands = [b for b in order if free[b] and M[a, b]]
        need = int(residual[a])
        if len(cands) < need:
            return
        excluded = free.copy()
        for idx in range(len(cands) - need + 1):
            b = cands[idx]
            nxt_free = excluded.copy()
            nxt_free[b] = False
            search(residual - (M[:, b] & (residual > 0)), nxt_free, cols + [b],
                   weight + weights[b])
            excluded[b] = False

    search(_demands(instance), np.ones(len(instance.objects), dtype=bool), [], Fraction(0))
    selection = CoverSelection.of(instance, (instance.objects[b].id for b in best["cols"]))
    logger.debug("exact cover: %d objects, weight %s", len(selection.objects), selection.weight)
    return selection


def validate_cover(instance: CoverInstance, selection: Union[CoverSelection, Iterable[int]]) -> CoverReport:
    ids = set(selection.objects if isinstance(selection, CoverSelection) else selection)
    chosen = [o for o in instance.objects if o.id in ids]
    shortfalls = []
    for a, p in enumerate(instance.points):
        covered = sum(1 for o in chosen if contains(o, p))
        if covered < p.demand:
            shortfalls.append((a, covered, p.demand))
    return CoverReport(ok=not shortfalls, shortfalls=tuple(shortfalls))


def solve_cover(instance: CoverInstance, solver: str = "greedy",
                object_limit: int = 22) -> CoverSelection:
    """Dispatch by name; exact falls back to greedy above the object limit."""
    if solver == "exact":
        if len(instance.objects) <= object_limit:
            return exact_multicover(instance, object_limit)
        logger.warning("exact cover refused (%d objects > %d); using greedy",
                       len(instance.objects), object_limit)
    return greedy_multicover(instance)
