"""Batch runner, two-scenario scoring, and report files."""

from __future__ import annotations

import json

import pytest

from hlsdse.agent import (
    FailureReason,
    IlpFirstPolicy,
    OraclePolicy,
    Success,
    TrialAndErrorPolicy,
)
from hlsdse.bench import builtin
from hlsdse.design import Configuration, area_to_tenths
from hlsdse.errors import EmptyInput, ParseError
from hlsdse.experiment import (
    ACTION_KINDS,
    SUMMARY_COLUMNS,
    PolicySpec,
    RunRecord,
    ScoreTable,
    derive_seed,
    load_records,
    record_from_dict,
    record_to_dict,
    report,
    run_experiment,
    score,
    summary_rows,
)
from hlsdse.latency import EvalResult

ORACLE = PolicySpec("oracle", OraclePolicy)
ILP = PolicySpec("ilp-first[correct]", IlpFirstPolicy)
TRIAL = PolicySpec("trial-error", TrialAndErrorPolicy)


def small_batch() -> list[RunRecord]:
    return run_experiment([builtin("SYN1")], [ORACLE, ILP], repetitions=2)


# ---------------------------------------------------------------------------
# Seeds


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seed(0, "SYN1", "oracle", 0) == 9043657470298741296
    assert derive_seed(0, "SYN1", "oracle", 1) == 17421464095948436962
    assert derive_seed(7, "SYN2", "trial-error", 3) == 440224868653402457
    seeds = {
        derive_seed(m, b, p, r)
        for m in (0, 1)
        for b in ("SYN1", "SYN2")
        for p in ("oracle", "trial-error")
        for r in (0, 1, 2)
    }
    assert len(seeds) == 24


# ---------------------------------------------------------------------------
# Running batches


def test_batch_produces_one_record_per_combination():
    records = small_batch()
    assert [(r.policy, r.rep) for r in records] == [
        ("oracle", 0),
        ("oracle", 1),
        ("ilp-first[correct]", 0),
        ("ilp-first[correct]", 1),
    ]
    for record in records:
        assert record.benchmark == "SYN1"
        assert record.seed == derive_seed(0, "SYN1", record.policy, record.rep)
        assert isinstance(record.outcome, Success)
        assert record.met_target
        assert record.area_target_tenths == 4635
        assert record.final_latency == record.outcome.result.latency
        assert record.final_area_tenths == record.outcome.result.area_tenths
        assert set(record.actions_by_kind) == set(ACTION_KINDS)
        assert record.transcript is not None
        assert record.wall_time_s > 0
        assert record.fault_log == ()


def test_oracle_runs_spend_exactly_one_action():
    records = run_experiment([builtin("SYN1")], [ORACLE], repetitions=1)
    assert records[0].actions_by_kind == {
        "inspect": 0,
        "solve_ilp": 0,
        "synthesize": 0,
        "select": 1,
    }
    assert records[0].final_latency == 10
    assert records[0].final_area_tenths == 3710


def test_broken_variant_generation_becomes_a_failure_record():
    records = run_experiment(
        [builtin("SYN1")], [ORACLE], repetitions=2, fault_rate=1.0
    )
    for record in records:
        assert record.outcome.reason is FailureReason.FUNCTIONALITY_BROKEN
        assert record.final_latency is None
        assert record.final_area_tenths is None
        assert record.area_target_tenths is None
        assert not record.met_target
        assert record.actions_by_kind == {kind: 0 for kind in ACTION_KINDS}
        assert record.transcript is None


def test_repetitions_must_be_positive():
    with pytest.raises(ValueError):
        run_experiment([builtin("SYN1")], [ORACLE], repetitions=0)


def test_reruns_are_identical():
    first = [record_to_dict(r) for r in small_batch()]
    second = [record_to_dict(r) for r in small_batch()]
    assert first == second


# ---------------------------------------------------------------------------
# Record serialization


def test_record_round_trip():
    for record in small_batch():
        data = record_to_dict(record)
        assert set(data) == {
            "benchmark",
            "policy",
            "rep",
            "seed",
            "outcome",
            "actions_by_kind",
            "final_latency",
            "final_area",
            "area_target",
            "met_target",
            "fault_log",
        }
        assert data["final_area"] == record.outcome.result.area
        clone = record_from_dict(json.loads(json.dumps(data)))
        assert clone.transcript is None
        assert clone.wall_time_s == 0.0
        assert record_to_dict(clone) == data


def test_failure_record_round_trip():
    record = run_experiment(
        [builtin("SYN1")], [ORACLE], repetitions=1, fault_rate=1.0
    )[0]
    clone = record_from_dict(record_to_dict(record))
    assert clone.outcome == record.outcome
    assert clone.final_area_tenths is None


def test_load_records_reports_the_offending_line(tmp_path):
    records = small_batch()
    path = tmp_path / "runs.jsonl"
    lines = [json.dumps(record_to_dict(r), sort_keys=True) for r in records]
    path.write_text("\n".join(lines) + "\n")
    loaded = load_records(path)
    assert [record_to_dict(r) for r in loaded] == [record_to_dict(r) for r in records]

    path.write_text(lines[0] + "\n\nnot json\n")
    with pytest.raises(ParseError) as exc_info:
        load_records(path)
    assert exc_info.value.where == f"{path}:3"

    path.write_text(lines[0] + "\n{}\n")
    with pytest.raises(ParseError) as exc_info:
        load_records(path)
    assert exc_info.value.where == f"{path}:2"


# ---------------------------------------------------------------------------
# Scoring


def synthetic_record(
    benchmark: str,
    policy: str,
    area_units: float,
    latency: int,
    target_units: float = 100.0,
    rep: int = 0,
) -> RunRecord:
    area_tenths = area_to_tenths(area_units)
    target_tenths = area_to_tenths(target_units)
    met = area_tenths <= target_tenths
    return RunRecord(
        benchmark=benchmark,
        policy=policy,
        rep=rep,
        seed=rep,
        outcome=Success(
            configuration=Configuration.from_mapping({"top": 0}),
            result=EvalResult(latency=latency, area_tenths=area_tenths),
            met_target=met,
        ),
        actions_by_kind={kind: 0 for kind in ACTION_KINDS},
        final_latency=latency,
        final_area_tenths=area_tenths,
        area_target_tenths=target_tenths,
        met_target=met,
    )


def test_scenario1_rewards_the_fastest_target_meeting_run():
    records = [
        synthetic_record("B1", "p1", 95.0, 50),
        synthetic_record("B1", "p2", 98.0, 45),
        synthetic_record("B1", "p3", 110.0, 40),
    ]
    rows = score(records).by_pair()
    assert rows[("B1", "p1")].scenario1_points == 0
    assert rows[("B1", "p2")].scenario1_points == 1
    assert rows[("B1", "p3")].scenario1_points == 0
    assert all(row.scenario2_points == 0 for row in rows.values())
    assert rows[("B1", "p1")].runs_meeting_target == 1
    assert rows[("B1", "p3")].runs_meeting_target == 0


def test_scenario2_rewards_every_minimum_area_run():
    records = [
        synthetic_record("B2", "p1", 120.0, 50),
        synthetic_record("B2", "p2", 115.0, 45),
        synthetic_record("B2", "p3", 115.0, 40),
    ]
    rows = score(records).by_pair()
    assert all(row.scenario1_points == 0 for row in rows.values())
    assert rows[("B2", "p1")].scenario2_points == 0
    assert rows[("B2", "p2")].scenario2_points == 1
    assert rows[("B2", "p3")].scenario2_points == 1


def test_one_meeting_run_suppresses_the_area_scenario():
    records = [
        synthetic_record("B3", "p1", 90.0, 50),
        synthetic_record("B3", "p2", 120.0, 30),
        synthetic_record("B3", "p3", 130.0, 35),
    ]
    rows = score(records).by_pair()
    assert rows[("B3", "p1")].scenario1_points == 1
    assert rows[("B3", "p2")].scenario1_points == 0
    assert all(row.scenario2_points == 0 for row in rows.values())


def test_benchmarks_are_judged_independently():
    records = [
        synthetic_record("B1", "p1", 95.0, 50),
        synthetic_record("B1", "p2", 98.0, 45),
        synthetic_record("B1", "p3", 110.0, 40),
        synthetic_record("B2", "p1", 120.0, 50),
        synthetic_record("B2", "p2", 115.0, 45),
        synthetic_record("B2", "p3", 115.0, 40),
    ]
    rows = score(records).by_pair()
    assert rows[("B1", "p2")].scenario1_points == 1
    assert rows[("B2", "p2")].scenario2_points == 1
    assert rows[("B2", "p3")].scenario2_points == 1
    assert rows[("B1", "p2")].runs == 1


def test_failed_runs_never_score():
    broken = RunRecord(
        benchmark="B2",
        policy="p1",
        rep=1,
        seed=1,
        outcome=run_experiment(
            [builtin("SYN1")], [ORACLE], repetitions=1, fault_rate=1.0
        )[0].outcome,
        actions_by_kind={kind: 0 for kind in ACTION_KINDS},
        final_latency=None,
        final_area_tenths=None,
        area_target_tenths=None,
        met_target=False,
    )
    records = [
        synthetic_record("B2", "p1", 120.0, 50),
        synthetic_record("B2", "p2", 115.0, 45),
        broken,
    ]
    rows = score(records).by_pair()
    assert rows[("B2", "p2")].scenario2_points == 1
    assert rows[("B2", "p1")].scenario2_points == 0
    assert rows[("B2", "p1")].runs == 2


def test_scoring_rejects_an_empty_batch():
    with pytest.raises(EmptyInput):
        score([])


# ---------------------------------------------------------------------------
# Reports


def test_report_writes_the_full_file_set(tmp_path):
    records = small_batch()
    table = score(records)
    written = report(records, table, tmp_path / "out")
    names = [p.relative_to(tmp_path / "out").as_posix() for p in written]
    assert names == [
        "summary.csv",
        "runs.jsonl",
        "transcripts/SYN1__ilp-first[correct]__r00.jsonl",
        "transcripts/SYN1__ilp-first[correct]__r01.jsonl",
        "transcripts/SYN1__oracle__r00.jsonl",
        "transcripts/SYN1__oracle__r01.jsonl",
    ]

    header = (tmp_path / "out" / "summary.csv").read_text().splitlines()[0]
    assert header == ",".join(SUMMARY_COLUMNS)

    lines = (tmp_path / "out" / "runs.jsonl").read_text().splitlines()
    rows = [json.loads(line) for line in lines]
    keys = [(r["benchmark"], r["policy"], r["seed"]) for r in rows]
    assert keys == sorted(keys)
    assert len(rows) == 4
    assert all("wall_time_s" not in r and "transcript" not in r for r in rows)

    transcript_lines = (
        (tmp_path / "out" / "transcripts" / "SYN1__oracle__r00.jsonl")
        .read_text()
        .splitlines()
    )
    head = json.loads(transcript_lines[0])
    assert head == {
        "benchmark": "SYN1",
        "policy": "oracle",
        "rep": 0,
        "seed": derive_seed(0, "SYN1", "oracle", 0),
    }
    steps = [json.loads(line) for line in transcript_lines[1:]]
    assert [s["step"] for s in steps] == list(range(len(steps)))
    assert "select" in steps[-1]["action"]
    assert set(steps[-1]) == {"step", "action", "observation", "chars"}


def test_reports_are_byte_identical_across_reruns(tmp_path):
    for name in ("a", "b"):
        records = small_batch()
        report(records, score(records), tmp_path / name)
    for filename in ("summary.csv", "runs.jsonl"):
        assert (tmp_path / "a" / filename).read_bytes() == (
            tmp_path / "b" / filename
        ).read_bytes()


def test_broken_runs_write_no_transcript_file(tmp_path):
    records = run_experiment(
        [builtin("SYN1")], [ORACLE], repetitions=1, fault_rate=1.0
    )
    written = report(records, score(records), tmp_path)
    assert [p.name for p in written] == ["summary.csv", "runs.jsonl"]


def test_report_rejects_an_empty_batch(tmp_path):
    with pytest.raises(EmptyInput):
        report([], ScoreTable(rows=()), tmp_path)


def test_summary_rows_blank_out_all_failure_pairs():
    records = run_experiment(
        [builtin("SYN1")], [ORACLE], repetitions=2, fault_rate=1.0
    )
    rows = summary_rows(records, score(records))
    assert len(rows) == 1
    row = rows[0]
    assert row["success_rate"] == "0.000"
    assert row["mean_area"] == ""
    assert row["min_area"] == ""
    assert row["max_latency"] == ""
    assert row["runs"] == "2"


def test_summary_rows_format_successful_pairs():
    records = small_batch()
    rows = summary_rows(records, score(records))
    oracle_row = next(r for r in rows if r["policy"] == "oracle")
    assert oracle_row["runs"] == "2"
    assert oracle_row["success_rate"] == "1.000"
    assert oracle_row["mean_select"] == "1.00"
    assert oracle_row["mean_inspect"] == "0.00"
    assert oracle_row["mean_area"] == "371.00"
    assert oracle_row["min_area"] == "371.0"
    assert oracle_row["min_latency"] == "10"
    assert oracle_row["runs_meeting_target"] == "2"
    assert list(oracle_row) == list(SUMMARY_COLUMNS)