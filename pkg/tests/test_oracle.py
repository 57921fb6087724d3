"""
Exhaustive baselines: they back every approximation test, so they are
cross-checked against each other here.
"""
from __future__ import annotations

import pytest

from flowsched.exceptions import LimitExceededError
from flowsched.models import CosspInstance, CosspJob, DelayCost, PcspInstance, PcspJob
from flowsched.services.edf import edf_feasible
from flowsched.services.gen import random_cossp, random_pcsp
from flowsched.services.oracle import (
    deadlines_feasible_by_search,
    opt_cossp,
    opt_cossp_by_schedule,
    opt_pcsp,
)
from flowsched.services.validation import validate_pcsp_schedule


# ── COSSP ─────────────────────────────────────────────────────────────────────

def test_single_job_costs_release_plus_length():
    inst = CosspInstance(m=1, jobs=(CosspJob(r=1, p=(2,), cost=DelayCost.flow(1, 1)),))
    opt = opt_cossp(inst)
    assert opt.cost == 2
    assert opt.deadlines == (3,)


def test_two_unit_jobs_on_one_machine(two_jobs_one_machine):
    inst = CosspInstance(m=1, jobs=(CosspJob(r=0, p=(1,), cost=DelayCost.flow()),) * 2)
    assert opt_cossp(inst).cost == 1 + 2
    assert opt_cossp_by_schedule(inst) == 3
    assert opt_cossp(two_jobs_one_machine).cost == 2 + 4


def test_zero_workload_jobs_cost_their_release():
    inst = CosspInstance(m=1, jobs=(CosspJob(r=2, p=(0,), cost=DelayCost.flow()),
                                    CosspJob(r=1, p=(0,), cost=DelayCost.flow(3))))
    assert opt_cossp(inst).cost == 2 + 3


def test_optimal_deadlines_are_feasible(contention_instance):
    opt = opt_cossp(contention_instance)
    assert edf_feasible(contention_instance, opt.deadlines)
    assert deadlines_feasible_by_search(contention_instance, opt.deadlines)


def test_deadline_and_schedule_searches_agree():
    checked = 0
    for seed in range(40):
        inst = random_cossp(seed, 2 + seed % 2, 1 + seed % 2, 2, "mixed")
        if inst.horizon > 12:
            continue
        assert opt_cossp(inst).cost == opt_cossp_by_schedule(inst), seed
        checked += 1
    assert checked >= 20


def test_cossp_limits():
    big = CosspInstance(m=1, jobs=tuple(CosspJob(r=0, p=(1,), cost=DelayCost.flow()) for _ in range(5)))
    with pytest.raises(LimitExceededError):
        opt_cossp(big)
    long = CosspInstance(m=1, jobs=(CosspJob(r=10, p=(5,), cost=DelayCost.flow()),))
    with pytest.raises(LimitExceededError):
        opt_cossp(long)
    with pytest.raises(LimitExceededError):
        opt_cossp_by_schedule(big)


# ── PCSP ──────────────────────────────────────────────────────────────────────

def test_chain_runs_serially(chain_instance):
    opt = opt_pcsp(chain_instance)
    assert opt.completions == (3, 4, 5)
    assert opt.cost == 2 + 3 + 3
    assert validate_pcsp_schedule(chain_instance, opt.schedule).ok


@pytest.mark.parametrize("m,expected", [(1, 1 + 2), (2, 1 + 1)])
def test_independent_unit_jobs(m, expected):
    inst = PcspInstance(m=m, jobs=(PcspJob(1, 0, DelayCost.flow()), PcspJob(1, 0, DelayCost.flow())))
    assert opt_pcsp(inst).cost == expected


def test_zero_size_job_completes_with_predecessor():
    inst = PcspInstance(
        m=1,
        jobs=(PcspJob(1, 0, DelayCost.flow()), PcspJob(0, 0, DelayCost.flow())),
        edges=((0, 1),),
    )
    opt = opt_pcsp(inst)
    assert opt.completions == (1, 1)
    assert opt.cost == 2


def test_pcsp_schedules_validate():
    for seed in range(15):
        inst = random_pcsp(seed, 2 + seed % 3, 1 + seed % 2, 2, edge_prob=0.5)
        opt = opt_pcsp(inst)
        assert validate_pcsp_schedule(inst, opt.schedule).ok, seed


def test_pcsp_limits():
    inst = PcspInstance(m=1, jobs=tuple(PcspJob(1, 0, DelayCost.flow()) for _ in range(7)))
    with pytest.raises(LimitExceededError):
        opt_pcsp(inst)
