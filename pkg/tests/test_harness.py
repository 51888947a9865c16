"""Tests für Experiment-Runner, RunCache, Router-Cache und Policy-Auswertung."""

import json

import pytest

from reliability_engine.channel.channel_models import AgentOutput
from reliability_engine.core.run_models import (
    RUN_FAILED,
    RunRecord,
    Task,
    TaskCategory,
    TechniqueName,
)
from reliability_engine.exceptions import ConfigValidationError
from reliability_engine.harness.experiment_runner import ExperimentRunner, run_experiment
from reliability_engine.harness.harness_models import ExperimentConfig, FoldPlan
from reliability_engine.harness.policy_evaluator import (
    FIXED_BEST_CV,
    evaluate_policies,
    feasible_choices,
    fixed_best,
    make_fold_plan,
    simulate_acm,
    technique_summary,
)
from reliability_engine.harness.router_cache import (
    aggregate_outcomes,
    build_router_cache,
    load_router_cache,
    save_router_cache,
)
from reliability_engine.harness.run_cache import RunCache
from reliability_engine.routing.embeddings import HashEmbedder
from reliability_engine.routing.routing_models import (
    CacheEntry,
    McsProfile,
    McsTable,
    TechniqueOutcome,
)

TASKS = [
    Task(id="t1", prompt="Wie viele Primzahlen liegen unter 20?", category=TaskCategory.REASONING),
    Task(id="t2", prompt="Nenne die Hauptstadt von Kanada.", category=TaskCategory.QA),
]


def _experiment_data(cache_dir, techniques=("baseline", "sc", "mrc"), repeats=2, **overrides):
    data = {
        "name": "test",
        "channels": [
            {"name": "gen-a", "backend": "synthetic", "model_id": "a",
             "synthetic": {"base_quality": 0.6, "quality_noise_sd": 0.1, "seed": 1}},
            {"name": "gen-b", "backend": "synthetic", "model_id": "b",
             "synthetic": {"base_quality": 0.55, "quality_noise_sd": 0.1, "seed": 2}},
            {"name": "judge", "backend": "synthetic", "model_id": "judge",
             "synthetic": {"quality_noise_sd": 0.0, "cost_per_call": 0.0001, "seed": 3}},
        ],
        "judge": "judge",
        "techniques": [{"technique": t} for t in techniques],
        "repeats": repeats,
        "cache_dir": str(cache_dir),
        "max_concurrency": 1,
        "max_workers": 2,
    }
    data.update(overrides)
    return data


def _experiment(cache_dir, techniques=("baseline", "sc", "mrc"), repeats=2, **overrides):
    return ExperimentConfig.parse_obj(_experiment_data(cache_dir, techniques, repeats, **overrides))


def _output(cost):
    return AgentOutput(text="x", model_id="m", temperature=0.7, completion_tokens=1, cost_usd=cost)


def _record(task_id, technique, repeat, quality, cost=0.001):
    return RunRecord(
        task_id=task_id,
        technique=technique,
        repeat_index=repeat,
        final_quality=quality,
        individual_outputs=[_output(cost)],
    )


def _entry(task_id, outcomes, category="qa", difficulty=None, embedding=None):
    return CacheEntry(
        task_id=task_id,
        embedding=embedding or [1.0, 0.0],
        category=category,
        per_technique={t: TechniqueOutcome(quality=q, cost=c) for t, (q, c) in outcomes.items()},
        baseline_cost=outcomes["baseline"][1],
        difficulty=difficulty,
    )


@pytest.fixture
def router_entries():
    """Leichte Aufgaben: Baseline reicht; schwere: Turbo gewinnt deutlich."""
    entries = []
    for i in range(12):
        hard = i % 2 == 1
        outcomes = {
            "baseline": (0.45 if hard else 0.8, 1.0),
            "turbo": (0.85 if hard else 0.8, 4.0),
            "fec": (0.6, 2.0),
        }
        entries.append(
            _entry(
                f"t{i:02d}",
                outcomes,
                category="reasoning" if hard else "qa",
                difficulty=0.7 + 0.01 * i if hard else 0.1 + 0.01 * i,
                embedding=[0.1, 1.0] if hard else [1.0, 0.1],
            )
        )
    return entries


# ---------------------------------------------------------------------------
# Konfiguration
# ---------------------------------------------------------------------------


def test_experiment_adds_missing_baseline(tmp_path):
    config = _experiment(tmp_path, techniques=("sc",))
    assert [t.name for t in config.techniques] == ["baseline", "sc"]
    assert config.pool_names() == ["gen-a", "gen-b"]


def test_experiment_rejects_unknown_judge_and_duplicates(tmp_path):
    with pytest.raises(ValueError):
        _experiment(tmp_path, judge="nobody")
    with pytest.raises(ValueError):
        _experiment(tmp_path, techniques=("baseline", "sc", "sc"))
    with pytest.raises(ValueError):
        _experiment(tmp_path, roles={"painter": "gen-a"})


def test_fold_plan_rejects_out_of_range_index():
    with pytest.raises(ValueError):
        FoldPlan(n_folds=2, assignment={"t1": 2})


# ---------------------------------------------------------------------------
# Runner und RunCache
# ---------------------------------------------------------------------------


def test_runner_writes_one_record_per_task_technique_repeat(tmp_path):
    runner = ExperimentRunner(_experiment(tmp_path / "cache"), tasks=TASKS)
    summary = runner.run()

    assert summary.executed == 12
    assert summary.failed == 0
    cache = RunCache(tmp_path / "cache")
    assert cache.techniques() == ["baseline", "mrc", "sc"]
    for technique in ("baseline", "mrc", "sc"):
        records = cache.records(technique)
        assert [(r.task_id, r.repeat_index) for r in records] == [
            ("t1", 0), ("t1", 1), ("t2", 0), ("t2", 1)
        ]
        assert all(r.total_cost > 0 for r in records)
    assert set(cache.pilot_difficulties()) == {"t1", "t2"}
    assert [t.id for t in cache.load_tasks()] == ["t1", "t2"]


def test_complete_cache_issues_no_channel_calls(tmp_path, monkeypatch):
    config = _experiment(tmp_path / "cache")
    ExperimentRunner(config, tasks=TASKS).run()

    second = ExperimentRunner(config, tasks=TASKS)

    def boom(*args, **kwargs):
        raise AssertionError("Kanal darf nicht aufgerufen werden")

    for channel in second.channels.values():
        monkeypatch.setattr(channel.backend, "generate", boom)
    summary = second.run()
    assert summary.executed == 0
    assert summary.skipped == 12


def test_runs_are_reproducible_across_fresh_caches(tmp_path):
    first = ExperimentRunner(_experiment(tmp_path / "a"), tasks=TASKS)
    second = ExperimentRunner(_experiment(tmp_path / "b"), tasks=TASKS)
    first.run()
    second.run()
    for technique in ("baseline", "sc", "mrc"):
        a = [r.final_quality for r in first.cache.records(technique)]
        b = [r.final_quality for r in second.cache.records(technique)]
        assert a == b


def test_transport_failure_is_retried_on_next_run(tmp_path, scripted_channel, judge):
    config = _experiment(tmp_path / "cache", techniques=("baseline",), repeats=1,
                         pool=["gen-a"])
    generator = scripted_channel("gen-a", ["Q=0.7000"], fail=True)
    channels = {"gen-a": generator, "gen-b": generator, "judge": judge}
    runner = ExperimentRunner(config, tasks=TASKS[:1], channels=channels)

    summary = runner.run()
    assert summary.failed == 1
    assert summary.failures == ["t1|baseline|0"]
    record = runner.cache.get("t1", "baseline", 0)
    assert record.final_quality == 0.0
    assert "run_failed" in record.flags
    assert "error" in record.metadata

    summary = runner.run()
    assert summary.executed == 1
    assert summary.failed == 1

    generator.backend.fail = False
    summary = runner.run()
    assert summary.executed == 1
    assert summary.skipped == 0
    assert summary.failed == 0
    record = runner.cache.get("t1", "baseline", 0)
    assert "run_failed" not in record.flags
    assert record.final_quality == pytest.approx(0.7)
    assert runner.run().executed == 0


def test_acm_without_table_is_a_config_error(tmp_path):
    runner = ExperimentRunner(_experiment(tmp_path / "cache", techniques=("acm",)), tasks=TASKS)
    with pytest.raises(ConfigValidationError):
        runner.technique_params(runner.config.techniques[1])


def test_run_experiment_from_config_file(tmp_path):
    tasks_file = tmp_path / "tasks.json"
    tasks_file.write_text(json.dumps({"tasks": [t.dict() for t in TASKS]}, default=str), encoding="utf-8")
    config_file = tmp_path / "experiment.json"
    data = _experiment_data("cache", techniques=("baseline", "sc"), repeats=1, tasks_file="tasks.json")
    config_file.write_text(json.dumps(data), encoding="utf-8")

    cache = run_experiment(config_file)
    assert cache.techniques() == ["baseline", "sc"]
    assert len(cache.records("sc")) == 2
    assert (tmp_path / "cache").is_dir()
    assert [t.id for t in cache.load_tasks()] == ["t1", "t2"]


def test_run_cache_replaces_same_key_and_survives_reload(cache_dir):
    cache = RunCache(cache_dir)
    cache.add(_record("t1", "sc", 0, 0.5))
    cache.add(_record("t1", "sc", 0, 0.9))
    cache.add(_record("t2", "sc", 0, 0.4))

    reloaded = RunCache(cache_dir)
    assert [r.final_quality for r in reloaded.records("sc")] == [0.9, 0.4]
    assert reloaded.has("t1", "sc", 0)
    assert not reloaded.has("t1", "sc", 1)
    assert not list(cache_dir.glob("*.tmp"))


def test_run_cache_rejects_corrupt_file(cache_dir):
    (cache_dir / "sc.json").write_text("{kaputt", encoding="utf-8")
    with pytest.raises(ConfigValidationError):
        RunCache(cache_dir).records("sc")


def test_run_cache_without_task_snapshot(cache_dir):
    with pytest.raises(ConfigValidationError):
        RunCache(cache_dir).load_tasks()


# ---------------------------------------------------------------------------
# Router-Cache
# ---------------------------------------------------------------------------


def test_aggregate_outcomes_averages_repeats():
    records = {
        "baseline": [_record("t1", "baseline", r, q, 0.001) for r, q in enumerate((0.6, 0.7, 0.8))],
        "sc": [_record("t1", "sc", 0, 0.9, 0.003)],
    }
    outcomes = aggregate_outcomes(records)
    assert outcomes["t1"]["baseline"].quality == pytest.approx(0.7)
    assert outcomes["t1"]["baseline"].cost == pytest.approx(0.001)
    assert outcomes["t1"]["sc"].cost == pytest.approx(0.003)


def _failed(task_id, technique, repeat):
    return RunRecord(
        task_id=task_id,
        technique=technique,
        repeat_index=repeat,
        final_quality=0.0,
        rounds=0,
        flags={RUN_FAILED},
    )


def test_aggregate_outcomes_ignores_failed_runs():
    records = {
        "baseline": [_record("t1", "baseline", 0, 0.6), _record("t2", "baseline", 0, 0.5)],
        "mrc": [
            _record("t1", "mrc", 0, 0.9, 0.05),
            _failed("t1", "mrc", 1),
            _record("t1", "mrc", 2, 0.9, 0.05),
            _failed("t2", "mrc", 0),
            _failed("t2", "mrc", 1),
        ],
    }
    outcomes = aggregate_outcomes(records)
    assert outcomes["t1"]["mrc"].quality == pytest.approx(0.9)
    assert outcomes["t1"]["mrc"].cost == pytest.approx(0.05)
    assert set(outcomes["t2"]) == {"baseline"}

    entries = build_router_cache(records, TASKS, HashEmbedder(16))
    by_id = {e.task_id: e for e in entries}
    assert "mrc" not in by_id["t2"].per_technique
    assert by_id["t1"].per_technique["mrc"].quality == pytest.approx(0.9)


def test_aggregate_outcomes_drops_task_when_every_run_failed():
    records = {"baseline": [_record("t1", "baseline", 0, 0.6), _failed("t2", "baseline", 0)]}
    assert set(aggregate_outcomes(records)) == {"t1"}


def test_router_cache_omits_missing_techniques_and_tasks_without_baseline():
    records = {
        "baseline": [_record("t1", "baseline", 0, 0.6)],
        "sc": [_record("t1", "sc", 0, 0.8), _record("t2", "sc", 0, 0.9)],
    }
    entries = build_router_cache(records, TASKS, HashEmbedder(16), difficulties={"t1": 0.3})
    assert [e.task_id for e in entries] == ["t1"]
    assert set(entries[0].per_technique) == {"baseline", "sc"}
    assert entries[0].difficulty == 0.3
    assert entries[0].category == "reasoning"
    assert entries[0].baseline_cost == pytest.approx(0.001)


def test_router_cache_is_deterministic_and_round_trips(tmp_path):
    records = {"baseline": [_record(t.id, "baseline", 0, 0.6) for t in TASKS]}
    first = build_router_cache(records, TASKS, HashEmbedder(32))
    second = build_router_cache(records, TASKS, HashEmbedder(32))
    assert [e.embedding for e in first] == [e.embedding for e in second]

    path = tmp_path / "router_cache.jsonl"
    save_router_cache(first, path)
    assert len(path.read_text(encoding="utf-8").splitlines()) == 2
    assert load_router_cache(path) == first


def test_load_router_cache_rejects_garbage(tmp_path):
    path = tmp_path / "router_cache.jsonl"
    path.write_text(json.dumps({"task_id": "t1"}) + "\n", encoding="utf-8")
    with pytest.raises(ConfigValidationError):
        load_router_cache(path)


# ---------------------------------------------------------------------------
# Folds und Policies
# ---------------------------------------------------------------------------


def test_fold_plan_is_stratified_and_deterministic(router_entries):
    plan = make_fold_plan(router_entries, n_folds=3, seed=5)
    assert plan == make_fold_plan(router_entries, n_folds=3, seed=5)
    assert set(plan.assignment) == {e.task_id for e in router_entries}
    for category in ("qa", "reasoning"):
        folds = [plan.assignment[e.task_id] for e in router_entries if e.category == category]
        assert sorted(folds.count(f) for f in range(3)) == [2, 2, 2]
    for fold in range(3):
        assert set(plan.test_ids(fold)).isdisjoint(plan.train_ids(fold))


def test_fold_plan_needs_two_tasks(router_entries):
    with pytest.raises(ConfigValidationError):
        make_fold_plan(router_entries[:1])


def test_fixed_best_breaks_quality_ties_by_cost(router_entries):
    # Mittel: baseline .625, turbo .825, fec .6
    assert fixed_best(router_entries) == "turbo"
    tied = [_entry("a", {"baseline": (0.8, 1.0), "turbo": (0.8, 4.0)})]
    assert fixed_best(tied) == "baseline"


def test_fixed_best_only_considers_covering_techniques():
    full = _entry("a", {"baseline": (0.5, 1.0), "mrc": (0.95, 3.0)})
    partial = _entry("b", {"baseline": (0.5, 1.0)})
    assert fixed_best([full]) == "mrc"
    assert fixed_best([full], covering=[partial]) == "baseline"
    assert fixed_best([full, partial]) == "baseline"
    with pytest.raises(ConfigValidationError):
        fixed_best([_entry("c", {"sc": (0.5, 1.0), "baseline": (0.5, 1.0)})],
                   covering=[CacheEntry(task_id="d", embedding=[1.0, 0.0], baseline_cost=1.0,
                                        per_technique={"mrc": TechniqueOutcome(quality=0.5, cost=1.0)})])


def _partial_coverage_entries():
    entries = []
    for i in range(8):
        outcomes = {"baseline": (0.5, 1.0), "sc": (0.6, 2.0)}
        if i != 3:
            outcomes["mrc"] = (0.95, 3.0)
        entries.append(_entry(f"t{i}", outcomes, embedding=[1.0, 0.1 * i]))
    return entries


def test_policy_table_with_partial_technique_coverage():
    entries = _partial_coverage_entries()
    frame = evaluate_policies(
        entries, make_fold_plan(entries, n_folds=2), lambdas=[0.0], k=3, n_boot=200
    ).set_index("policy")

    assert frame.loc["fixed-best (in-sample)", "mean_quality"] == pytest.approx(0.6)
    assert frame.loc["feasible", "mean_quality"] >= frame.loc["fixed-best (in-sample)", "mean_quality"]
    assert frame.loc["oracle", "mean_quality"] == pytest.approx((7 * 0.95 + 0.6) / 8)
    assert frame.loc["always-baseline", "mean_quality"] == pytest.approx(0.5)
    assert "fixed-best (cv)" in frame.index


def test_feasible_choices_stay_within_cached_techniques():
    entries = _partial_coverage_entries()
    choices = feasible_choices(entries, k=3)
    assert all(choices[e.task_id] in e.per_technique for e in entries)


def test_feasible_policy_matches_oracle_on_separable_cache(router_entries):
    choices = feasible_choices(router_entries, k=3)
    for entry in router_entries:
        assert entry.per_technique[choices[entry.task_id]].quality == pytest.approx(
            entry.per_technique[entry.best_technique()].quality
        )


def test_simulated_acm_uses_difficulty_table(router_entries):
    table = McsTable(
        profiles=[
            McsProfile(name="MCS-0", difficulty_range=(0.0, 0.5), technique=TechniqueName.BASELINE),
            McsProfile(name="MCS-1", difficulty_range=(0.5, 1.0), technique=TechniqueName.TURBO),
        ]
    )
    choices = simulate_acm(router_entries, table)
    assert choices["t00"] == "baseline"
    assert choices["t01"] == "turbo"

    with pytest.raises(ConfigValidationError):
        simulate_acm([_entry("x", {"baseline": (0.5, 1.0)})], table)


def test_policy_table_orders_reference_points(router_entries):
    frame = evaluate_policies(
        router_entries,
        make_fold_plan(router_entries, n_folds=3, seed=1),
        lambdas=[0.0, 0.1],
        k=3,
        l2=0.1,
        n_boot=200,
    ).set_index("policy")

    for name in ("oracle", "feasible", "always-baseline", FIXED_BEST_CV, "semknn(lam=0)"):
        assert name in frame.index
    assert (frame["mean_quality"] <= frame.loc["oracle", "mean_quality"] + 1e-12).all()
    assert frame.loc["feasible", "mean_quality"] >= frame.loc["fixed-best (in-sample)", "mean_quality"]

    baseline = frame.loc["always-baseline"]
    assert baseline["rho"] == pytest.approx(1.0)
    assert baseline["gain"] == pytest.approx(0.0)

    reference = frame.loc[FIXED_BEST_CV]
    assert reference["delta_q"] == pytest.approx(0.0)
    assert reference["wilcoxon_p"] == pytest.approx(1.0)
    assert bool(frame["on_frontier"].any())
    for _, row in frame.iterrows():
        assert row["ci_low"] - 1e-12 <= row["mean_quality"] <= row["ci_high"] + 1e-12


def test_policy_table_requires_baseline():
    entries = [
        CacheEntry(
            task_id=f"t{i}",
            embedding=[1.0],
            per_technique={"sc": TechniqueOutcome(quality=0.5, cost=1.0)},
            baseline_cost=1.0,
        )
        for i in range(3)
    ]
    with pytest.raises(ConfigValidationError):
        evaluate_policies(entries, make_fold_plan(entries, n_folds=2), lambdas=[0.0])


def test_technique_summary_pairs_records_by_repeat(router_entries):
    records = {
        "baseline": [_record(e.task_id, "baseline", 0, e.per_technique["baseline"].quality)
                     for e in router_entries],
        "turbo": [_record(e.task_id, "turbo", 0, e.per_technique["turbo"].quality, 0.004)
                  for e in router_entries],
    }
    frame = technique_summary(router_entries, records, n_boot=200).set_index("technique")
    assert frame.loc["baseline", "rho"] == pytest.approx(1.0)
    assert frame.loc["turbo", "rho"] == pytest.approx(4.0)
    assert frame.loc["turbo", "gain"] == pytest.approx(0.2)
    assert frame.loc["turbo", "efficiency"] == pytest.approx(0.05)
    assert frame.loc["turbo", "win_rate"] == pytest.approx(0.5)
