"""
Schedule validators: hand-built good and bad schedules.
"""
from __future__ import annotations

from fractions import Fraction as F

from flowsched.models import (
    DelayCost,
    MigratorySchedule,
    PcspInstance,
    PcspJob,
    Schedule,
    Segment,
    SlotEntry,
)
from flowsched.services.pcsp import list_schedule, scale_rates
from flowsched.services.validation import validate_cossp_schedule, validate_pcsp_schedule


def _slots(*pairs):
    return tuple(SlotEntry(slot=s, job=j) for s, j in pairs)


# ── COSSP ─────────────────────────────────────────────────────────────────────

def test_feasible_hand_schedule(two_jobs_one_machine):
    sched = Schedule(machines=(_slots((1, 0), (2, 0), (3, 1), (4, 1)),), completions=(2, 4))
    report = validate_cossp_schedule(two_jobs_one_machine, sched)
    assert report.ok
    assert report.violations == []


def test_processing_at_release_is_early(contention_instance):
    # Job 1 is released at 1, so slot 1 = (0, 1] is too early.
    sched = Schedule(
        machines=(_slots((1, 1), (2, 0), (3, 0)), _slots((2, 0), (3, 2), (4, 2), (5, 1), (6, 1))),
        completions=(3, 6, 4),
    )
    report = validate_cossp_schedule(contention_instance, sched)
    assert not report.ok
    assert "early-processing" in report.codes


def test_missing_units_are_incomplete(two_jobs_one_machine):
    sched = Schedule(machines=(_slots((1, 0), (2, 0), (3, 1)),), completions=(2, 4))
    report = validate_cossp_schedule(two_jobs_one_machine, sched)
    assert report.codes == {"incomplete"}


def test_double_booked_slot(two_jobs_one_machine):
    sched = Schedule(machines=(_slots((1, 0), (1, 1), (2, 0), (3, 1)),), completions=(2, 3))
    assert "machine-overlap" in validate_cossp_schedule(two_jobs_one_machine, sched).codes


def test_processing_after_completion(two_jobs_one_machine):
    sched = Schedule(machines=(_slots((1, 0), (2, 1), (3, 1), (4, 0)),), completions=(2, 3))
    assert validate_cossp_schedule(two_jobs_one_machine, sched).codes == {"late-processing"}


def test_unknown_job_and_wrong_completion_count(two_jobs_one_machine):
    bad_job = Schedule(machines=(_slots((1, 0), (2, 0), (3, 1), (4, 1), (5, 7)),), completions=(2, 4))
    assert "unknown-job" in validate_cossp_schedule(two_jobs_one_machine, bad_job).codes
    short = Schedule(machines=((),), completions=(2,))
    assert validate_cossp_schedule(two_jobs_one_machine, short).codes == {"completion-mismatch"}


def test_extra_units_are_over_processed(two_jobs_one_machine):
    sched = Schedule(machines=(_slots((1, 0), (2, 0), (3, 0), (4, 1), (5, 1)),), completions=(3, 5))
    assert validate_cossp_schedule(two_jobs_one_machine, sched).codes == {"over-processed"}


# ── PCSP ──────────────────────────────────────────────────────────────────────

def test_list_schedule_output_on_chain_is_valid(chain_instance):
    listed = list_schedule(chain_instance, [0, 1, 2], alpha=3)
    half = [F(job.p, 2) for job in chain_instance.jobs]
    assert validate_pcsp_schedule(chain_instance, listed, sizes=half).ok
    assert validate_pcsp_schedule(chain_instance, scale_rates(listed, 2)).ok


def _two_unit_jobs(edges=()):
    return PcspInstance(
        m=1,
        jobs=(PcspJob(1, 0, DelayCost.flow()), PcspJob(1, 0, DelayCost.flow())),
        edges=edges,
    )


def _seg(machine, start, end, rate=1):
    return Segment(machine, F(start), F(end), F(rate))


def test_successor_started_early():
    inst = _two_unit_jobs(edges=((0, 1),))
    mig = MigratorySchedule(
        speed=F(1),
        segments=((_seg(0, 1, 2),), (_seg(0, 0, 1),)),
        completions=(F(2), F(1)),
        starts=(F(1), F(0)),
    )
    assert "precedence" in validate_pcsp_schedule(inst, mig).codes


def test_two_jobs_on_one_machine_at_once():
    inst = _two_unit_jobs()
    mig = MigratorySchedule(
        speed=F(1),
        segments=((_seg(0, 0, 1),), (_seg(0, F(1, 2), F(3, 2)),)),
        completions=(F(1), F(3, 2)),
        starts=(F(0), F(0)),
    )
    assert validate_pcsp_schedule(inst, mig).codes == {"machine-overlap"}


def test_rate_above_speed():
    inst = _two_unit_jobs()
    mig = MigratorySchedule(
        speed=F(1),
        segments=((_seg(0, 0, F(1, 2), 2),), (_seg(0, 1, 2),)),
        completions=(F(1, 2), F(2)),
        starts=(F(0), F(0)),
    )
    assert validate_pcsp_schedule(inst, mig).codes == {"speed"}


def test_migration_flagged_only_when_required():
    inst = _two_unit_jobs()
    mig = MigratorySchedule(
        speed=F(1),
        segments=((_seg(0, 0, F(1, 2)), _seg(1, F(1, 2), 1)), (_seg(0, 1, 2),)),
        completions=(F(1), F(2)),
        starts=(F(0), F(0)),
    )
    two_machines = PcspInstance(m=2, jobs=inst.jobs)
    assert validate_pcsp_schedule(two_machines, mig).ok
    report = validate_pcsp_schedule(two_machines, mig, require_nonmigratory=True)
    assert report.codes == {"migration"}
