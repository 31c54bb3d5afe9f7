"""Acceptance suite: ten behavioral criteria for the whole package.

Each test prints one PASS/FAIL line (visible even under pytest capture) and
enforces the stated runtime tolerance where one applies.
"""

from __future__ import annotations

import random
import time

from helpers import random_configuration, random_design

from hlsdse.agent import (
    IlpFirstPolicy,
    OraclePolicy,
    Success,
    TrialAndErrorPolicy,
    run,
)
from hlsdse.bench import builtin, builtin_names, formula_latency, gap_fixture
from hlsdse.cli import main
from hlsdse.design import Configuration, area_to_tenths, enumerate_configurations
from hlsdse.experiment import (
    ACTION_KINDS,
    PolicySpec,
    RunRecord,
    run_experiment,
    score,
)
from hlsdse.ilp import ConstrainedArea, Lagrangian, SolveStatus, build_model, solve
from hlsdse.latency import (
    EvalResult,
    LatencyModelKind,
    brute_force_optimum,
    eval_faulty_latency,
    eval_latency_given,
    evaluate,
)
from hlsdse.variantgen import derive_area_target, optimize_bottom_up

SCRIPTED = [
    PolicySpec("oracle", OraclePolicy),
    PolicySpec("ilp-first[correct]", IlpFirstPolicy),
    PolicySpec("trial-error", TrialAndErrorPolicy),
]


def _verdict(capsys, number: int, description: str, body) -> None:
    try:
        body()
    except BaseException:
        with capsys.disabled():
            print(f"FAIL criterion {number:2d}: {description}", flush=True)
        raise
    with capsys.disabled():
        print(f"PASS criterion {number:2d}: {description}", flush=True)


def _prepared(name: str):
    result = optimize_bottom_up(builtin(name).skeleton)
    target = derive_area_target(result.baseline.area_tenths)
    return result.design, target


def test_criterion_01_stored_formulas_match_evaluation(capsys):
    def body():
        started = time.perf_counter()
        for name in builtin_names():
            benchmark = builtin(name)
            rng = random.Random(f"formula:{name}")
            for _ in range(50):
                latencies = {
                    kid: rng.randint(1, 1000) for kid in benchmark.skeleton.kernels
                }
                expected = formula_latency(benchmark, latencies)
                actual = eval_latency_given(
                    benchmark.skeleton, lambda kid: latencies[kid]
                )
                assert actual == expected, (name, latencies)
        assert time.perf_counter() - started < 1.0

    _verdict(capsys, 1, "stored latency formulas match evaluation on all builtins", body)


def test_criterion_02_faulty_model_ordering(capsys):
    def body():
        started = time.perf_counter()
        rng = random.Random("ordering")
        for _ in range(1000):
            design = random_design(rng)
            config = random_configuration(rng, design)
            values = {
                kind: eval_faulty_latency(kind, design, config)
                for kind in (
                    LatencyModelKind.TOP_ONLY,
                    LatencyModelKind.TOP_PLUS_MAX_CHILDREN,
                    LatencyModelKind.CORRECT,
                    LatencyModelKind.SUM_WITH_MULTIPLIERS,
                )
            }
            assert (
                values[LatencyModelKind.TOP_ONLY]
                <= values[LatencyModelKind.TOP_PLUS_MAX_CHILDREN]
                <= values[LatencyModelKind.CORRECT]
                <= values[LatencyModelKind.SUM_WITH_MULTIPLIERS]
            ), (design, config, values)
        assert time.perf_counter() - started < 5.0

    _verdict(capsys, 2, "model catalog keeps its predicted-latency ordering", body)


def test_criterion_03_solver_matches_exhaustive_enumeration(capsys):
    def body():
        started = time.perf_counter()

        def check(design, target):
            solution = solve(
                build_model(design, ConstrainedArea(target), LatencyModelKind.CORRECT)
            )
            oracle = brute_force_optimum(design, target)
            if oracle.best_feasible is None:
                assert solution.status is SolveStatus.INFEASIBLE
                return
            config, result = oracle.best_feasible
            assert solution.status is SolveStatus.OPTIMAL
            assert solution.configuration == config
            assert solution.predicted_latency == result.latency
            assert solution.predicted_area_tenths == result.area_tenths

        for name in builtin_names():
            check(*_prepared(name))

        rng = random.Random("solver-oracle")
        for i in range(100):
            design = random_design(rng)
            areas = sorted(
                evaluate(design, c).area_tenths
                for c in enumerate_configurations(design)
            )
            if i % 3 == 0:
                target = areas[0] - 1
            else:
                target = areas[len(areas) // 2]
            check(design, target)
        assert time.perf_counter() - started < 10.0

    _verdict(capsys, 3, "exact solver equals brute-force enumeration everywhere", body)


def test_criterion_04_lagrangian_solutions_are_undominated(capsys):
    def body():
        for name in builtin_names():
            design, target = _prepared(name)
            solution = solve(
                build_model(design, Lagrangian(target, 1), LatencyModelKind.CORRECT)
            )
            assert solution.status is SolveStatus.OPTIMAL
            sol_latency = solution.predicted_latency
            sol_distance = abs(solution.predicted_area_tenths - target)
            for config in enumerate_configurations(design):
                result = evaluate(design, config)
                distance = abs(result.area_tenths - target)
                dominates = (
                    result.latency <= sol_latency
                    and distance <= sol_distance
                    and (result.latency < sol_latency or distance < sol_distance)
                )
                assert not dominates, (name, config, result)

    _verdict(capsys, 4, "penalty-objective answers are never dominated", body)


def test_criterion_05_wrong_model_inflates_achieved_latency(capsys):
    def body():
        design, target = gap_fixture()
        oracle = brute_force_optimum(design, target)
        best_config, best_result = oracle.best_feasible
        assert best_result.latency == 35

        misled, _ = run(
            IlpFirstPolicy(latency_model=LatencyModelKind.SUM_ALL),
            design,
            area_target_tenths=target,
        )
        assert isinstance(misled, Success)
        misled_true = evaluate(design, misled.configuration)
        assert misled_true.latency > best_result.latency

        informed, _ = run(IlpFirstPolicy(), design, area_target_tenths=target)
        assert isinstance(informed, Success)
        assert evaluate(design, informed.configuration).latency == best_result.latency
        assert informed.configuration == best_config

    _verdict(capsys, 5, "a wrong internal model provably costs real latency", body)


def test_criterion_06_two_benchmarks_miss_the_default_target(capsys):
    def body():
        for name in ("SYN2", "SYN4"):
            design, target = _prepared(name)
            assert brute_force_optimum(design, target).best_feasible is None
            for spec in SCRIPTED:
                outcome, _ = run(spec.make(), design, area_target_tenths=target)
                assert isinstance(outcome, Success), (name, spec.id)
                assert not outcome.met_target, (name, spec.id)

    _verdict(capsys, 6, "SYN2 and SYN4 are infeasible at the 0.9 target for all policies", body)


def test_criterion_07_trial_and_error_works_harder(capsys):
    def body():
        benchmarks = [builtin(f"SYN{i}") for i in range(1, 7)]
        records = run_experiment(
            benchmarks,
            [
                PolicySpec("ilp-first[correct]", IlpFirstPolicy),
                PolicySpec("trial-error", TrialAndErrorPolicy),
            ],
            repetitions=10,
        )

        def mean_effort(benchmark: str, policy: str) -> float:
            mine = [
                r
                for r in records
                if r.benchmark == benchmark and r.policy == policy
            ]
            assert len(mine) == 10
            return sum(
                r.actions_by_kind["synthesize"] + r.actions_by_kind["inspect"]
                for r in mine
            ) / len(mine)

        for benchmark in (b.name for b in benchmarks):
            assert mean_effort(benchmark, "trial-error") > mean_effort(
                benchmark, "ilp-first[correct]"
            ), benchmark

    _verdict(capsys, 7, "iterative probing spends more actions than solver-first", body)


def test_criterion_08_scoring_rules_on_a_nine_record_fixture(capsys):
    def body():
        def rec(benchmark, policy, area_units, latency):
            area_tenths = area_to_tenths(area_units)
            target_tenths = area_to_tenths(100.0)
            met = area_tenths <= target_tenths
            return RunRecord(
                benchmark=benchmark,
                policy=policy,
                rep=0,
                seed=0,
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

        records = [
            rec("B1", "p1", 95.0, 50),
            rec("B1", "p2", 98.0, 45),
            rec("B1", "p3", 110.0, 40),
            rec("B2", "p1", 120.0, 50),
            rec("B2", "p2", 115.0, 45),
            rec("B2", "p3", 115.0, 40),
            rec("B3", "p1", 90.0, 50),
            rec("B3", "p2", 120.0, 30),
            rec("B3", "p3", 130.0, 35),
        ]
        rows = score(records).by_pair()

        # Two runs meet the B1 target; only the faster one scores.
        assert rows[("B1", "p1")].runs_meeting_target == 1
        assert rows[("B1", "p2")].runs_meeting_target == 1
        assert [rows[("B1", p)].scenario1_points for p in ("p1", "p2", "p3")] == [0, 1, 0]
        assert all(rows[("B1", p)].scenario2_points == 0 for p in ("p1", "p2", "p3"))

        # Nothing meets the B2 target; both minimum-area runs score.
        assert [rows[("B2", p)].scenario1_points for p in ("p1", "p2", "p3")] == [0, 0, 0]
        assert [rows[("B2", p)].scenario2_points for p in ("p1", "p2", "p3")] == [0, 1, 1]

        # A single target-meeting run takes the point despite slower latency.
        assert [rows[("B3", p)].scenario1_points for p in ("p1", "p2", "p3")] == [1, 0, 0]
        assert all(rows[("B3", p)].scenario2_points == 0 for p in ("p1", "p2", "p3"))

    _verdict(capsys, 8, "two-scenario scoring reproduces the rule examples", body)


def test_criterion_09_full_runs_are_byte_identical(capsys, tmp_path):
    def body():
        for name in ("first", "second"):
            assert main(["run", "--out", str(tmp_path / name)]) == 0
        for filename in ("runs.jsonl", "summary.csv"):
            first = (tmp_path / "first" / filename).read_bytes()
            second = (tmp_path / "second" / filename).read_bytes()
            assert first == second, filename

    _verdict(capsys, 9, "identical seeds reproduce identical report files", body)


def test_criterion_10_default_experiment_is_fast_and_reliable(capsys):
    def body():
        started = time.perf_counter()
        records = run_experiment(
            [builtin(name) for name in builtin_names()], SCRIPTED, repetitions=10
        )
        elapsed = time.perf_counter() - started
        assert elapsed < 60.0, elapsed
        assert len(records) == 8 * 3 * 10
        for policy in ("oracle", "ilp-first[correct]"):
            mine = [r for r in records if r.policy == policy]
            assert len(mine) == 80
            assert all(isinstance(r.outcome, Success) for r in mine), policy

    _verdict(capsys, 10, "default batch finishes quickly with reliable policies", body)