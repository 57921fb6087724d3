"""
Bench harness: suite construction, concurrent runs, report files and the
SQLite archive.
"""
from __future__ import annotations

import json
from fractions import Fraction

import pytest

from flowsched.config import Settings
from flowsched.database import dispose_engines, fetch_rows
from flowsched.exceptions import InstanceValidationError
from flowsched.services.bench import (
    CSV_COLUMNS,
    bench,
    build_suite,
    fmt_number,
    run_bench,
    run_case,
    write_report,
)
from flowsched.services.gen import dks_case1_cost

SUITES = {
    "mini": [
        {"kind": "random-cossp", "count": 2, "n": 3, "m": 2, "pmax": 2, "oracle": True},
        {"kind": "random-pcsp", "count": 1, "n": 3, "m": 2, "pmax": 2, "oracle": True},
    ],
    "hard": [
        {"kind": "dks", "count": 1, "n": 5, "m": 1},
        {"kind": "makespan-gap", "count": 1, "n": 2, "m": 1},
    ],
    "too-big": [
        {"kind": "random-cossp", "count": 1, "n": 5, "m": 1, "pmax": 2, "oracle": True},
    ],
}


@pytest.fixture
def bench_settings() -> Settings:
    return Settings(lp_mode="rational", bench_timings=False, bench_workers=2,
                    bench_suites_json=json.dumps(SUITES))


# ── Formatting ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("value,text", [
    (None, ""),
    (3, "3"),
    (Fraction(6, 2), "3"),
    (Fraction(1, 3), "0.333333"),
    (2.5, "2.500000"),
])
def test_fmt_number(value, text):
    assert fmt_number(value) == text


# ── Suites ────────────────────────────────────────────────────────────────────

def test_default_suites_are_available(settings):
    cases = build_suite("tiny", settings, seed=0)
    assert len(cases) == 8
    assert cases[0].id == "random-cossp-000"
    assert cases[4].id == "random-pcsp-004"
    assert [c.seed for c in cases[:4]] == [0, 1, 2, 3]


def test_unknown_suite(settings):
    with pytest.raises(InstanceValidationError):
        build_suite("nope", settings)


def test_custom_suite_from_json(bench_settings):
    cases = build_suite("mini", bench_settings, seed=5)
    assert [c.id for c in cases] == ["random-cossp-000", "random-cossp-001", "random-pcsp-002"]
    assert [c.seed for c in cases] == [5, 6, 5]


def test_hardness_rows(bench_settings):
    dks_case, gap_case = build_suite("hard", bench_settings, seed=1)
    [row] = run_case(dks_case, bench_settings)
    assert row.solver == "dks-case1"
    assert row.cost == str(dks_case1_cost(dks_case.dks))
    [row] = run_case(gap_case, bench_settings)
    assert row.solver == "pcsp"
    assert row.status == "ok"


def test_solver_failure_becomes_error_row(bench_settings):
    [case] = build_suite("too-big", bench_settings)
    rows = run_case(case, bench_settings)
    assert [r.solver for r in rows] == ["cossp", "opt-cossp"]
    assert rows[0].status == "ok"
    assert rows[1].status.startswith("error:")
    assert rows[1].cost == ""


# ── Runs and reports ──────────────────────────────────────────────────────────

async def test_run_bench_keeps_suite_order(bench_settings):
    cases = build_suite("mini", bench_settings)
    rows = await run_bench(cases, bench_settings, workers=3)
    assert [(r.id, r.solver) for r in rows] == [
        ("random-cossp-000", "cossp"), ("random-cossp-000", "opt-cossp"),
        ("random-cossp-001", "cossp"), ("random-cossp-001", "opt-cossp"),
        ("random-pcsp-002", "pcsp"), ("random-pcsp-002", "opt-pcsp"),
    ]
    assert all(r.status == "ok" for r in rows)
    assert all(r.ms == 0 for r in rows)
    for solver_row, opt_row in zip(rows[::2], rows[1::2]):
        if solver_row.solver == "cossp":
            assert int(opt_row.cost) <= int(solver_row.cost)


async def test_report_header_and_companion(bench_settings, tmp_path):
    rows = await run_bench(build_suite("mini", bench_settings), bench_settings)
    out = tmp_path / "reports" / "mini.csv"
    companion = write_report(rows, out)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + len(rows)
    doc = json.loads(companion.read_text(encoding="utf-8"))
    assert companion.suffix == ".json"
    assert doc[0]["status"] == "ok"
    assert len(doc) == len(rows)


async def test_reruns_are_byte_identical(bench_settings, tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    await bench("mini", first, bench_settings, seed=3)
    await bench("mini", second, bench_settings, seed=3)
    assert first.read_bytes() == second.read_bytes()
    assert first.with_suffix(".json").read_bytes() == second.with_suffix(".json").read_bytes()


async def test_rows_are_archived(bench_settings, tmp_path, archive_url):
    rows = await bench("mini", tmp_path / "r.csv", bench_settings, database_url=archive_url)
    try:
        stored = await fetch_rows(archive_url)
        assert len(stored) == len(rows)
        assert len({r.run_id for r in stored}) == 1
        assert [(r.instance_id, r.solver) for r in stored] == [(r.id, r.solver) for r in rows]
        assert (await fetch_rows(archive_url, stored[0].run_id))[0].cost == rows[0].cost
    finally:
        await dispose_engines()
