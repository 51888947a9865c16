"""Tests für Registry, Prompt-Bibliothek, Fan-out und Datenmodelle."""

import pytest
from pydantic import ValidationError

from reliability_engine.core.context import EngineConfig, RunRecorder
from reliability_engine.core.prompts import PromptLibrary
from reliability_engine.core.registry import TECHNIQUES, ChannelRoles, run_technique
from reliability_engine.core.run_models import Task, TechniqueConfig, TechniqueName
from reliability_engine.exceptions import ChannelTransportError, ConfigValidationError


def test_every_technique_is_registered():
    assert set(TECHNIQUES) == set(TechniqueName)


def test_run_technique_rejects_unknown_names_and_params(scripted_channel, context):
    roles = ChannelRoles([scripted_channel("g", ["Q=0.5000"])])
    with pytest.raises(ConfigValidationError):
        run_technique("telepathy", roles, "task", context)
    with pytest.raises(ConfigValidationError):
        run_technique(TechniqueName.SC, roles, "task", context, {"n": 3})
    with pytest.raises(ConfigValidationError):
        run_technique(TechniqueName.ACM, roles, "task", context)


def test_run_technique_passes_params(scripted_channel, context):
    gen = scripted_channel("g", ["Q=0.4000", "Q=0.6000", "Q=0.5000"])
    record = run_technique("best_of_n", ChannelRoles([gen]), "task", context, {"n": 3})
    assert gen.backend.calls == 3
    assert record.final_quality == pytest.approx(0.6)


def test_branches_cycle_and_truncate_the_pool(scripted_channel):
    a, b = scripted_channel("a", ["x"]), scripted_channel("b", ["y"])
    roles = ChannelRoles([a, b], critic=b)
    assert [c.name for c in roles.narrowed(branches=3).pool] == ["a", "b", "a"]
    assert [c.name for c in roles.narrowed(branches=1).pool] == ["a"]
    assert roles.narrowed(model_id="b").pool[0].name == "b"
    assert roles.narrowed(branches=1).critic is b
    with pytest.raises(ConfigValidationError):
        roles.narrowed(branches=0)


def test_roles_fall_back_to_primary(scripted_channel):
    gen = scripted_channel("g", ["x"])
    roles = ChannelRoles([gen])
    assert roles.role("synthesizer") is gen
    with pytest.raises(ConfigValidationError):
        ChannelRoles([])


def test_technique_config_name_and_overrides():
    config = TechniqueConfig(technique=TechniqueName.TURBO, label="turbo-4", max_iterations=4,
                             channels=["gen-a"])
    assert config.name == "turbo-4"
    assert config.overrides() == {"max_iterations": 4}
    assert TechniqueConfig(technique="fec").name == "fec"
    with pytest.raises(ValidationError):
        TechniqueConfig(technique="turbo", alpha0=0.05)


def test_prompt_library_renders_and_reports_gaps():
    prompts = PromptLibrary()
    assert "Wie spät?" in prompts.render("pilot_probe", task="Wie spät?")
    assert len(prompts.turbo_lenses) >= 3
    assert set(prompts.parity_instructions) == {"reasoning", "verification", "alternative", "confidence"}
    with pytest.raises(ConfigValidationError):
        prompts.render("no_such_template")
    with pytest.raises(ConfigValidationError):
        prompts.render("pilot_probe")


def test_fan_out_keeps_order_and_returns_transport_errors(context):
    def fail():
        raise ChannelTransportError("weg", status_code=503)

    results = context.fan_out([lambda: 1, fail, lambda: 3])
    assert results[0] == 1 and results[2] == 3
    assert isinstance(results[1], ChannelTransportError)
    assert context.fan_out([]) == []


def test_engine_config_validation():
    with pytest.raises(ConfigValidationError):
        EngineConfig(max_workers=0)


def test_recorder_accounts_cost_per_category(scripted_channel):
    gen = scripted_channel("g", ["Q=0.5000"], cost=0.002)
    recorder = RunRecorder(Task(id="t", prompt="p"), "sc")
    recorder.add_individual(gen.generate("p"))
    recorder.add_overhead(gen.generate("q"))
    recorder.flag("single_branch")
    record = recorder.finish("Q=0.5000", 1.3, rounds=2)
    assert record.final_quality == 1.0
    assert record.total_cost == pytest.approx(0.004)
    assert record.call_count == 2
    assert record.flags == {"single_branch"}
    assert "processing_time" in record.metadata


def test_task_coerce_from_text():
    task = Task.coerce("Wie hoch ist der Mount Everest?")
    assert task.prompt == "Wie hoch ist der Mount Everest?"
    assert task.id
    with pytest.raises(ValidationError):
        Task(id="x", prompt="   ")
