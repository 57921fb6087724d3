"""
Unit tests for delay costs, instances and the JSON schema layer.
"""
from __future__ import annotations

from fractions import Fraction

import pytest

from flowsched.exceptions import (
    CycleDetectedError,
    InstanceValidationError,
    InvalidCompletionError,
)
from flowsched.models import (
    CosspInstance,
    CosspJob,
    DelayCost,
    PcspInstance,
    PcspJob,
    eval_cost,
    expand_weights_to_dummies,
    extend_completions,
    latest_time_within_budget,
    total_cost,
)
from flowsched.schemas import InstancePayload, ScheduleDocument
from flowsched.services.edf import build_edf_schedule


# ── Costs ─────────────────────────────────────────────────────────────────────

def test_tardiness_cost():
    assert eval_cost(DelayCost.tardiness(2, 5), 7) == 4


def test_flow_cost_at_release_is_zero():
    assert eval_cost(DelayCost.flow(1, 0), 0) == 0


def test_power_cost():
    assert eval_cost(DelayCost.power(3, 2, 1), 4) == 27


def test_table_cost_steps():
    g = DelayCost.table([(3, 2), (1, 1), (6, 5)])
    assert [g(t) for t in range(8)] == [0, 1, 1, 2, 2, 2, 5, 5]


def test_table_must_be_non_decreasing():
    with pytest.raises(InstanceValidationError):
        DelayCost.table([(1, 4), (2, 3)]).validate()


def test_costs_stay_exact_on_rationals():
    assert eval_cost(DelayCost.flow(2, 1), Fraction(7, 3)) == Fraction(8, 3)


@pytest.mark.parametrize("budget,expected", [(Fraction(1, 2), None), (4, 4), (100, 8)])
def test_latest_time_within_budget(budget, expected):
    assert latest_time_within_budget(DelayCost.flow(1, 0), budget, 0, 8) == expected


def test_latest_time_rejects_empty_range():
    with pytest.raises(InstanceValidationError):
        latest_time_within_budget(DelayCost.flow(1, 0), 3, 5, 5)


# ── Instances ─────────────────────────────────────────────────────────────────

def test_cossp_derived_quantities():
    inst = CosspInstance(
        m=2,
        jobs=(
            CosspJob(r=0, p=(3, 1), cost=DelayCost.flow()),
            CosspJob(r=2, p=(1, 0), cost=DelayCost.flow()),
        ),
    )
    assert inst.L == 4
    assert inst.horizon == 6
    assert inst.P == 3


def test_cossp_rejects_wrong_op_vector():
    inst = CosspInstance(m=2, jobs=(CosspJob(r=0, p=(1,), cost=DelayCost.flow()),))
    with pytest.raises(InstanceValidationError):
        inst.validate()


def test_cossp_rejects_all_zero_instance():
    inst = CosspInstance(m=1, jobs=(CosspJob(r=0, p=(0,), cost=DelayCost.flow()),))
    with pytest.raises(InstanceValidationError):
        inst.validate()


def test_pcsp_cycle_is_rejected():
    inst = PcspInstance(
        m=1,
        jobs=tuple(PcspJob(p=1, r=1, cost=DelayCost.flow()) for _ in range(3)),
        edges=((0, 1), (1, 2), (2, 0)),
    )
    with pytest.raises(CycleDetectedError):
        inst.validate()


def test_topological_order_is_lexicographic(diamond_instance):
    assert diamond_instance.topological_order == (0, 1, 2, 3)
    assert diamond_instance.predecessors(2) == [0, 1]


def test_total_cost_two_flow_jobs():
    inst = PcspInstance(m=1, jobs=(PcspJob(1, 0, DelayCost.flow()), PcspJob(1, 0, DelayCost.flow())))
    assert total_cost(inst, [2, 3]) == 5
    assert total_cost(inst, [0, 0]) == 0


def test_total_cost_tardiness_before_due_dates():
    inst = PcspInstance(m=1, jobs=(PcspJob(1, 0, DelayCost.tardiness(4, 6)),
                                   PcspJob(1, 0, DelayCost.tardiness(1, 2))))
    assert total_cost(inst, [5, 2]) == 0


def test_total_cost_rejects_completion_before_release():
    inst = PcspInstance(m=1, jobs=(PcspJob(1, 3, DelayCost.flow(1, 3)),))
    with pytest.raises(InvalidCompletionError):
        total_cost(inst, [2])


# ── Dummy expansion ───────────────────────────────────────────────────────────

def test_weight_three_job_gains_three_dummies():
    inst = PcspInstance(m=1, jobs=(PcspJob(2, 1, DelayCost.flow(3, 1)),))
    out = expand_weights_to_dummies(inst)
    assert out.n == 4
    assert out.edges == ((0, 1), (0, 2), (0, 3))
    assert all(job.p == 0 and job.cost.w == 1 for job in out.jobs[1:])
    assert out.jobs[0].cost.w == 0


def test_weight_zero_job_gains_no_dummies():
    inst = PcspInstance(m=1, jobs=(PcspJob(2, 1, DelayCost.flow(0, 1)),))
    assert expand_weights_to_dummies(inst).n == 1


def test_dummy_expansion_preserves_weighted_flow(diamond_instance):
    expanded = expand_weights_to_dummies(diamond_instance)
    completions = [3, 4, 6, 2]
    assert total_cost(expanded, extend_completions(diamond_instance, completions)) == \
        total_cost(diamond_instance, completions)


def test_dummy_expansion_rejects_other_costs():
    inst = PcspInstance(m=1, jobs=(PcspJob(2, 1, DelayCost.tardiness(1, 4)),))
    with pytest.raises(InstanceValidationError):
        expand_weights_to_dummies(inst)


# ── JSON layer ────────────────────────────────────────────────────────────────

def test_instance_payload_round_trip(contention_instance):
    doc = InstancePayload.from_domain(contention_instance).to_json_dict()
    assert doc["jobs"][2]["cost"] == {"kind": "weighted-tardiness", "w": 1, "d": 3}
    assert "edges" not in doc
    assert InstancePayload(**doc).to_domain() == contention_instance


def test_cossp_payload_rejects_edges():
    doc = {"kind": "cossp", "m": 1, "edges": [[0, 1]],
           "jobs": [{"r": 0, "p": [1], "cost": {"kind": "weighted-flow", "w": 1}}] * 2}
    with pytest.raises(InstanceValidationError):
        InstancePayload(**doc).to_domain()


def test_pcsp_payload_needs_scalar_size():
    doc = {"kind": "pcsp", "m": 1,
           "jobs": [{"r": 1, "p": [1], "cost": {"kind": "weighted-flow", "w": 1}}]}
    with pytest.raises(InstanceValidationError):
        InstancePayload(**doc).to_domain()


def test_schedule_document_encodes_slots_as_segments(two_jobs_one_machine):
    sched = build_edf_schedule(two_jobs_one_machine, [2, 4])
    doc = ScheduleDocument.from_cossp(sched)
    first = doc.machines[0][0]
    assert (first.job, first.start, first.end) == (0, "0", "1")
    assert doc.to_cossp() == sched
