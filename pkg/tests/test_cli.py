"""
Command-line surface: exit codes and the documents each subcommand writes.
"""
from __future__ import annotations

import json

import pytest

from cli.flowsched import _settings, build_parser, run
from flowsched.config import get_settings


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def _gen(tmp_path, kind="random-cossp", *extra):
    path = tmp_path / f"{kind}.json"
    code = run(["gen", "--kind", kind, "--seed", "3", "--n", "3", "--m", "2",
                "--pmax", "2", "--out", str(path), *extra])
    assert code == 0
    return path


def test_gen_solve_check_roundtrip(tmp_path, capsys):
    inst = _gen(tmp_path)
    sol, rep = tmp_path / "sol.json", tmp_path / "rep.json"
    assert run(["solve-cossp", "--in", str(inst), "--out", str(sol), "--report", str(rep)]) == 0
    report = json.loads(rep.read_text())
    assert report["solver"] == "cossp"
    assert report["n"] == 3
    assert len(report["details"]["deadlines"]) == 3
    capsys.readouterr()
    assert run(["check", "--in", str(sol)]) == 0
    assert capsys.readouterr().out.strip() == "OK"


def test_check_reports_violations(tmp_path, capsys):
    inst = _gen(tmp_path)
    sol = tmp_path / "sol.json"
    assert run(["solve-cossp", "--in", str(inst), "--out", str(sol), "--mode", "rational"]) == 0
    doc = json.loads(sol.read_text())
    busy = next(m for m in doc["schedule"]["machines"] if m)
    busy.pop()
    sol.write_text(json.dumps(doc))
    capsys.readouterr()
    assert run(["check", "--in", str(sol)]) == 1
    out = capsys.readouterr().out
    assert "incomplete" in out
    assert "job=" in out


def test_solve_pcsp_with_report(tmp_path, capsys):
    inst = _gen(tmp_path, "random-pcsp")
    sol, rep = tmp_path / "sol.json", tmp_path / "rep.json"
    assert run(["solve-pcsp", "--in", str(inst), "--out", str(sol), "--report", str(rep),
                "--mode", "rational"]) == 0
    report = json.loads(rep.read_text())
    assert report["solver"] == "pcsp"
    assert report["speed"] is not None
    assert json.loads(sol.read_text())["schedule"]["kind"] == "pcsp"
    capsys.readouterr()
    assert run(["check", "--in", str(sol)]) == 0
    assert "OK" in capsys.readouterr().out


def test_solve_cossp_rejects_pcsp_instance(tmp_path):
    inst = _gen(tmp_path, "random-pcsp")
    assert run(["solve-cossp", "--in", str(inst)]) == 1


def test_oracle_prints_json(tmp_path, capsys):
    inst = _gen(tmp_path)
    capsys.readouterr()
    assert run(["oracle", "--in", str(inst)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "cossp"
    assert len(doc["completions"]) == 3
    assert int(doc["cost"]) > 0


def test_usage_errors_exit_2():
    assert run(["gen", "--bogus"]) == 2
    assert run([]) == 2


def test_missing_input_exits_1(tmp_path, capsys):
    assert run(["check", "--in", str(tmp_path / "absent.json")]) == 1
    assert "ERROR:" in capsys.readouterr().err


def test_bench_writes_csv(tmp_path, capsys):
    out = tmp_path / "tiny.csv"
    assert run(["bench", "--suite", "tiny", "--out", str(out), "--no-timings", "--workers", "2"]) == 0
    assert out.read_text().splitlines()[0] == "id,n,m,P,solver,cost,lp_bound,ratio,speed,ms"
    assert "rows written to" in capsys.readouterr().out


def test_bench_unknown_suite(tmp_path):
    assert run(["bench", "--suite", "nope", "--out", str(tmp_path / "x.csv")]) == 1


def test_bench_default_reports_are_byte_identical(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["bench", "--suite", "tiny", "--out", str(first)]) == 0
    assert run(["bench", "--suite", "tiny", "--out", str(second), "--workers", "3"]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert all(line.endswith(",0") for line in first.read_text().splitlines()[1:])
    assert first.with_suffix(".json").read_bytes() == second.with_suffix(".json").read_bytes()


@pytest.mark.parametrize("flags, expected", [([], False), (["--timings"], True), (["--no-timings"], False)])
def test_bench_timing_flags(flags, expected):
    args = build_parser().parse_args(["bench", "--suite", "tiny", "--out", "x.csv", *flags])
    assert _settings(args).bench_timings is expected


def test_bench_timing_flags_are_exclusive():
    assert run(["bench", "--suite", "tiny", "--out", "x.csv", "--timings", "--no-timings"]) == 2
