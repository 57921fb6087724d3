"""
Shared pytest fixtures – hand-built instances, exact-mode settings and a
throwaway SQLite archive.
"""
from __future__ import annotations

import pytest

from flowsched.config import Settings
from flowsched.models import CosspInstance, CosspJob, DelayCost, PcspInstance, PcspJob


@pytest.fixture
def settings() -> Settings:
    """Rational LP arithmetic, no timings: every run is exact and repeatable."""
    return Settings(lp_mode="rational", bench_timings=False, bench_workers=2)


@pytest.fixture
def float_settings() -> Settings:
    return Settings(lp_mode="float", bench_timings=False)


@pytest.fixture
def two_jobs_one_machine() -> CosspInstance:
    """m=1, two jobs released at 0 with two units each."""
    return CosspInstance(
        m=1,
        jobs=(
            CosspJob(r=0, p=(2,), cost=DelayCost.flow(1, 0)),
            CosspJob(r=0, p=(2,), cost=DelayCost.flow(1, 0)),
        ),
    )


@pytest.fixture
def contention_instance() -> CosspInstance:
    """Three jobs competing on two machines."""
    return CosspInstance(
        m=2,
        jobs=(
            CosspJob(r=0, p=(2, 1), cost=DelayCost.flow(1, 0)),
            CosspJob(r=1, p=(1, 2), cost=DelayCost.flow(2, 1)),
            CosspJob(r=0, p=(0, 2), cost=DelayCost.tardiness(1, 3)),
        ),
    )


@pytest.fixture
def chain_instance() -> PcspInstance:
    """a -> b -> c on one machine."""
    return PcspInstance(
        m=1,
        jobs=(
            PcspJob(p=2, r=1, cost=DelayCost.flow(1, 1)),
            PcspJob(p=1, r=1, cost=DelayCost.flow(1, 1)),
            PcspJob(p=1, r=2, cost=DelayCost.flow(1, 2)),
        ),
        edges=((0, 1), (1, 2)),
    )


@pytest.fixture
def diamond_instance() -> PcspInstance:
    return PcspInstance(
        m=2,
        jobs=(
            PcspJob(p=1, r=1, cost=DelayCost.flow(1, 1)),
            PcspJob(p=2, r=1, cost=DelayCost.flow(2, 1)),
            PcspJob(p=1, r=2, cost=DelayCost.flow(1, 2)),
            PcspJob(p=1, r=1, cost=DelayCost.flow(1, 1)),
        ),
        edges=((0, 2), (1, 2)),
    )


@pytest.fixture
def archive_url(tmp_path) -> str:
    return f"sqlite+aiosqlite:///{tmp_path / 'bench.db'}"
