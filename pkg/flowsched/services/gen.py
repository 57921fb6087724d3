"""
Instance generators: seeded random suites and the two hardness constructions.

Constructions with fractional job sizes are rescaled by an integer factor
so every size and release stays integral; the factor is returned next to
the instance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from flowsched.exceptions import InstanceValidationError
from flowsched.models import (
    CosspInstance,
    CosspJob,
    DelayCost,
    MigratorySchedule,
    PcspInstance,
    PcspJob,
    Segment,
    expand_weights_to_dummies,
    extend_completions,
)

logger = logging.getLogger(__name__)

COST_KINDS = ("flow", "power", "tardiness", "table", "mixed")


@dataclass(frozen=True)
class GeneratedInstance:
    instance: PcspInstance
    scale: int = 1


# ── Random suites ────────────────────────────────────────────────────────────

def _random_cost(rng: np.random.Generator, kind: str, r: int, span: int) -> DelayCost:
    if kind == "mixed":
        kind = ("flow", "power", "tardiness", "table")[int(rng.integers(0, 4))]
    w = int(rng.integers(1, 4))
    if kind == "flow":
        return DelayCost.flow(w, r)
    if kind == "power":
        return DelayCost.power(w, 2, r)
    if kind == "tardiness":
        return DelayCost.tardiness(w, r + int(rng.integers(0, span + 1)))
    if kind == "table":
        times = sorted({r + int(t) for t in rng.integers(1, span + 2, size=3)})
        values = np.cumsum(rng.integers(1, 4, size=len(times)))
        return DelayCost.table(zip(times, (int(v) for v in values)))
    raise InstanceValidationError(f"unknown cost kind {kind!r}; expected one of {COST_KINDS}")


def random_cossp(seed: int, n: int, m: int, pmax: int, cost_kind: str = "flow") -> CosspInstance:
    """
    Releases uniform in [0, n·pmax/2], operation lengths uniform in
    [0, pmax] with at least one positive operation per job.
    """
    rng = np.random.default_rng(seed)
    jobs = []
    for _ in range(n):
        r = int(rng.integers(0, n * pmax // 2 + 1))
        p = [int(x) for x in rng.integers(0, pmax + 1, size=m)]
        if not any(p):
            p[int(rng.integers(0, m))] = int(rng.integers(1, pmax + 1))
        jobs.append(CosspJob(r=r, p=tuple(p), cost=_random_cost(rng, cost_kind, r, n * pmax)))
    return CosspInstance(m=m, jobs=tuple(jobs)).validate()


def random_pcsp(seed: int, n: int, m: int, pmax: int, edge_prob: float = 0.3) -> PcspInstance:
    """Random DAG from coin flips over ordered pairs a < b; r, p >= 1."""
    rng = np.random.default_rng(seed)
    jobs = []
    for _ in range(n):
        r = int(rng.integers(1, max(2, n * pmax // 2) + 1))
        jobs.append(PcspJob(p=int(rng.integers(1, pmax + 1)), r=r,
                            cost=DelayCost.flow(int(rng.integers(1, 4)), r)))
    edges = tuple((a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < edge_prob)
    return PcspInstance(m=m, jobs=tuple(jobs), edges=edges).validate()


# ── Densest-k-subgraph reduction ─────────────────────────────────────────────

@dataclass(frozen=True)
class DksGraph:
    n: int
    edges: Tuple[Tuple[int, int], ...]
    k: int
    L: int
    T: int
    delta_inv: Optional[int] = None     # defaults to n²

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def scale(self) -> int:
        return self.delta_inv if self.delta_inv is not None else self.n * self.n

    def validate(self) -> "DksGraph":
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        for u, v in self.edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n) or g.has_edge(u, v):
                raise InstanceValidationError(f"edge ({u}, {v}) breaks a simple graph")
            g.add_edge(u, v)
        if not 0 <= self.L <= self.edge_count:
            raise InstanceValidationError(f"L={self.L} outside [0, {self.edge_count}]")
        if self.T < self.edge_count - self.L:
            raise InstanceValidationError(f"T={self.T} ends before {self.edge_count - self.L}")
        if self.scale < 1:
            raise InstanceValidationError("1/delta must be a positive integer")
        return self


def planted_dks_graph(seed: int, n: int, k: int, edge_prob: float = 0.3,
                      T: Optional[int] = None, delta_inv: Optional[int] = None) -> DksGraph:
    """G(n, p) with a clique planted on vertices 0..k-1; L counts its edges."""
    g = nx.gnp_random_graph(n, edge_prob, seed=seed)
    g.add_edges_from((u, v) for u in range(k) for v in range(u + 1, k))
    edges = tuple(sorted((min(u, v), max(u, v)) for u, v in g.edges()))
    L = g.subgraph(range(k)).number_of_edges()
    if T is None:
        T = len(edges) + 1
    return DksGraph(n=n, edges=edges, k=k, L=L, T=T, delta_inv=delta_inv).validate()


def _dks_layout(graph: DksGraph) -> Tuple[int, int, int]:
    """(first edge job, first stream job, stream length) in the unexpanded instance."""
    s = graph.scale
    stream = (graph.T - (graph.edge_count - graph.L)) * s
    return graph.n, graph.n + graph.edge_count, stream


def dks_reduction(graph: DksGraph, expand: bool = True) -> GeneratedInstance:
    """
    Single-machine instance with zero-size vertex jobs (weight 1), unit edge
    jobs (weight 0) preceding their endpoints, and a stream of δ-size unit
    weight jobs released every δ from E − L on. Sizes are scaled by 1/δ.
    """
    graph.validate()
    s = graph.scale
    base = (graph.edge_count - graph.L) * s
    first_edge, first_stream, stream = _dks_layout(graph)
    jobs: List[PcspJob] = [PcspJob(p=0, r=0, cost=DelayCost.flow(1, 0)) for _ in range(graph.n)]
    jobs += [PcspJob(p=s, r=0, cost=DelayCost.flow(0, 0)) for _ in graph.edges]
    jobs += [PcspJob(p=1, r=base + k, cost=DelayCost.flow(1, base + k)) for k in range(1, stream + 1)]
    edges = []
    for e, (u, v) in enumerate(graph.edges):
        edges.append((first_edge + e, u))
        edges.append((first_edge + e, v))
    instance = PcspInstance(m=1, jobs=tuple(jobs), edges=tuple(edges))
    if expand:
        instance = expand_weights_to_dummies(instance)
    logger.info("dks reduction: %d vertices, %d edges, %d stream jobs, scale %d",
                graph.n, graph.edge_count, stream, s)
    return GeneratedInstance(instance.validate(), scale=s)


def dks_case1_cost(graph: DksGraph) -> int:
    """Scaled cost of the schedule built by dks_case1_schedule."""
    E, L, T, k = graph.edge_count, graph.L, graph.T, graph.k
    return graph.scale * ((graph.n - k) * (E - L) + k * (T + L) + T - (E - L))


def dks_case1_schedule(graph: DksGraph, subset: Sequence[int], expand: bool = True) -> MigratorySchedule:
    """
    Schedule for a k-subset S with L induced edges: edges outside G[S] first,
    the stream at release, edges of G[S] in the remaining gaps, vertices of S
    completing at (T + L)/δ and the rest at (E − L)/δ.
    """
    graph.validate()
    S: FrozenSet[int] = frozenset(subset)
    inner = [e for e, (u, v) in enumerate(graph.edges) if u in S and v in S]
    if len(S) != graph.k or len(inner) != graph.L:
        raise InstanceValidationError(
            f"subset of size {len(S)} induces {len(inner)} edges; need k={graph.k}, L={graph.L}"
        )
    s = graph.scale
    base = (graph.edge_count - graph.L) * s
    first_edge, first_stream, stream = _dks_layout(graph)
    n_jobs = first_stream + stream
    segments: List[List[Segment]] = [[] for _ in range(n_jobs)]
    completions: List[Union[int, Fraction]] = [0] * n_jobs

    t = 0
    for e in range(graph.edge_count):
        if e in inner:
            continue
        segments[first_edge + e].append(Segment(0, Fraction(t), Fraction(t + s), Fraction(1)))
        t += s
        completions[first_edge + e] = t

    for k in range(1, stream + 1):
        r = base + k
        segments[first_stream + k - 1].append(Segment(0, Fraction(r), Fraction(r + 1), Fraction(1)))
        completions[first_stream + k - 1] = r + 1

    # Free capacity: the slot before the first stream release, then after the stream.
    gaps = [(base, base + 1), (base + stream + 1, graph.T * s + graph.L * s)] if inner else []
    cursor = [list(g) for g in gaps]
    for e in inner:
        need = s
        while need:
            lo, hi = cursor[0]
            take = min(need, hi - lo)
            if take:
                segments[first_edge + e].append(Segment(0, Fraction(lo), Fraction(lo + take), Fraction(1)))
                cursor[0][0] += take
                need -= take
                completions[first_edge + e] = lo + take
            if cursor[0][0] == cursor[0][1]:
                cursor.pop(0)

    for v in range(graph.n):
        completions[v] = (graph.T + graph.L) * s if v in S else base

    unexpanded = dks_reduction(graph, expand=False).instance
    starts: List[Union[int, Fraction]] = [
        max([job.r] + [completions[a] for a in unexpanded.predecessors(j)])
        for j, job in enumerate(unexpanded.jobs)
    ]
    if expand:
        # Dummies start and finish with their parents.
        completions = extend_completions(unexpanded, completions)
        starts = starts + completions[n_jobs:]
        segments += [[] for _ in range(len(completions) - n_jobs)]
    return MigratorySchedule(
        speed=Fraction(1),
        segments=tuple(tuple(segs) for segs in segments),
        completions=tuple(Fraction(c) for c in completions),
        starts=tuple(Fraction(x) for x in starts),
    )


# ── Makespan-gap construction ────────────────────────────────────────────────

def makespan_gap_instance(base: PcspInstance, gamma: Union[int, float, Fraction],
                          epsilon: Union[int, float, Fraction],
                          delta: Union[int, Fraction]) -> GeneratedInstance:
    """
    Base jobs released at 0 followed by a chain of δ-size unit-weight jobs
    released at 1 + kδ while that stays below T = γ^ε. Every stream job is
    preceded by all jobs released before it. Sizes are scaled by 1/δ.
    """
    base.validate()
    delta = Fraction(delta)
    if delta <= 0 or delta.numerator != 1:
        raise InstanceValidationError(f"delta must be 1/s for a positive integer s, got {delta}")
    s = delta.denominator
    T = float(gamma) ** float(epsilon)
    jobs = [PcspJob(p=job.p * s, r=0, cost=DelayCost.flow(1, 0)) for job in base.jobs]
    edges = list(base.edges)
    k = 1
    while 1 + k * delta < T:
        r = s + k
        j = len(jobs)
        edges.extend((a, j) for a, other in enumerate(jobs) if other.r < r)
        jobs.append(PcspJob(p=1, r=r, cost=DelayCost.flow(1, r)))
        k += 1
    instance = PcspInstance(m=base.m, jobs=tuple(jobs), edges=tuple(edges)).validate()
    logger.info("makespan gap: %d base jobs, %d stream jobs, scale %d",
                base.n, instance.n - base.n, s)
    return GeneratedInstance(instance, scale=s)
