"""
Seeded generators and the two hardness constructions.
"""
from __future__ import annotations

from fractions import Fraction

import pytest

from flowsched.exceptions import InstanceValidationError
from flowsched.models import DelayCost, PcspInstance, PcspJob, total_cost
from flowsched.services.gen import (
    DksGraph,
    dks_case1_cost,
    dks_case1_schedule,
    dks_reduction,
    makespan_gap_instance,
    planted_dks_graph,
    random_cossp,
    random_pcsp,
)
from flowsched.services.oracle import opt_pcsp
from flowsched.services.validation import validate_pcsp_schedule

TRIANGLE = DksGraph(n=3, edges=((0, 1), (0, 2), (1, 2)), k=2, L=1, T=3, delta_inv=1)


# ── Random suites ─────────────────────────────────────────────────────────────

def test_random_generators_are_deterministic():
    assert random_cossp(7, 4, 2, 3, "mixed") == random_cossp(7, 4, 2, 3, "mixed")
    assert random_pcsp(7, 5, 2, 3) == random_pcsp(7, 5, 2, 3)
    assert random_cossp(7, 4, 2, 3) != random_cossp(8, 4, 2, 3)


def test_unit_operations_give_unit_ratio():
    inst = random_cossp(1, 6, 3, 1)
    assert inst.P == 1
    assert all(any(job.p) for job in inst.jobs)


def test_empty_instance_is_rejected():
    with pytest.raises(InstanceValidationError):
        random_cossp(0, 0, 1, 2)


def test_unknown_cost_kind():
    with pytest.raises(InstanceValidationError):
        random_cossp(0, 2, 1, 2, "quadratic")


def test_random_pcsp_is_acyclic_with_forward_edges():
    inst = random_pcsp(3, 6, 2, 3, edge_prob=0.6)
    assert all(a < b for a, b in inst.edges)
    assert all(job.p >= 1 and job.r >= 1 for job in inst.jobs)


# ── DkS reduction ─────────────────────────────────────────────────────────────

def test_triangle_reduction_counts():
    gen = dks_reduction(TRIANGLE, expand=False)
    inst = gen.instance
    assert gen.scale == 1
    assert inst.n == 3 + 3 + 1
    assert len(inst.edges) == 6
    assert [job.p for job in inst.jobs[:3]] == [0, 0, 0]
    assert inst.jobs[-1].r == 3


def test_expanded_reduction_adds_unit_weight_dummies():
    inst = dks_reduction(TRIANGLE).instance
    # three vertices and one stream job carry weight 1
    assert inst.n == 7 + 4
    assert all(job.cost.w == 0 for job in inst.jobs[:7])


def test_triangle_case1_schedule():
    sched = dks_case1_schedule(TRIANGLE, [0, 1])
    inst = dks_reduction(TRIANGLE).instance
    assert validate_pcsp_schedule(inst, sched).ok
    assert total_cost(inst, sched.completions) == dks_case1_cost(TRIANGLE) == 11


def test_planted_case1_cost_matches_formula():
    graph = planted_dks_graph(seed=4, n=8, k=3, edge_prob=0.3, delta_inv=2)
    assert graph.L == 3
    sched = dks_case1_schedule(graph, range(3))
    inst = dks_reduction(graph).instance
    assert validate_pcsp_schedule(inst, sched).ok
    E, L, T = graph.edge_count, graph.L, graph.T
    expected = 2 * ((8 - 3) * (E - L) + 3 * (T + L) + T - (E - L))
    assert total_cost(inst, sched.completions) == expected == dks_case1_cost(graph)


def test_case1_needs_matching_subset():
    with pytest.raises(InstanceValidationError):
        dks_case1_schedule(TRIANGLE, [0])


def test_dks_graph_validation():
    with pytest.raises(InstanceValidationError):
        DksGraph(n=2, edges=((0, 0),), k=1, L=0, T=1).validate()
    with pytest.raises(InstanceValidationError):
        DksGraph(n=3, edges=((0, 1),), k=2, L=2, T=3).validate()
    with pytest.raises(InstanceValidationError):
        DksGraph(n=3, edges=((0, 1), (1, 2)), k=2, L=0, T=1).validate()


def test_default_scale_is_n_squared():
    assert DksGraph(n=4, edges=(), k=1, L=0, T=0).scale == 16


# ── Makespan gap ──────────────────────────────────────────────────────────────

def _one_job_base():
    return PcspInstance(m=1, jobs=(PcspJob(1, 0, DelayCost.flow()),))


def test_makespan_gap_single_stream_job():
    gen = makespan_gap_instance(_one_job_base(), gamma=2, epsilon=1, delta=Fraction(1, 2))
    inst = gen.instance
    assert gen.scale == 2
    assert inst.n == 2
    assert inst.jobs[0].p == 2
    assert (inst.jobs[1].p, inst.jobs[1].r) == (1, 3)
    assert inst.edges == ((0, 1),)


def test_makespan_gap_without_stream():
    gen = makespan_gap_instance(_one_job_base(), gamma=2, epsilon=0, delta=Fraction(1, 2))
    assert gen.instance.n == 1


def test_stream_is_totally_ordered():
    inst = makespan_gap_instance(_one_job_base(), gamma=4, epsilon=1, delta=Fraction(1, 2)).instance
    stream = list(range(1, inst.n))
    assert len(stream) == 5
    assert [inst.jobs[j].r for j in stream] == [3, 4, 5, 6, 7]
    assert all((a, a + 1) in inst.edges for a in stream[:-1])
    assert inst.topological_order == tuple(range(inst.n))


def test_makespan_gap_rejects_bad_delta():
    with pytest.raises(InstanceValidationError):
        makespan_gap_instance(_one_job_base(), gamma=2, epsilon=1, delta=Fraction(2, 3))


def test_makespan_gap_optimum_within_bound():
    base = _one_job_base()
    gen = makespan_gap_instance(base, gamma=2, epsilon=1, delta=Fraction(1, 2))
    opt = opt_pcsp(gen.instance)
    T = 2
    assert opt.cost == 3
    assert opt.cost <= (base.n + T) * gen.scale
