"""Tests der iterativen Decoder und des Kritik-Parsers."""

import json

import pytest

from reliability_engine.exceptions import ConfigValidationError
from reliability_engine.retransmit.critique_parser import (
    drop_applied,
    parse_critique,
    scale_extrinsic,
)
from reliability_engine.retransmit.retransmit_decoder import (
    run_harq_cc,
    run_harq_ir,
    run_self_refine,
    run_turbo,
)
from reliability_engine.retransmit.retransmit_models import (
    CritiqueIssue,
    IssueType,
    IterationState,
    Severity,
)


def _critique(*issues):
    return json.dumps(
        [
            {"quote": quote, "type": "factual_error", "correction": f"fix {quote}", "severity": sev}
            for quote, sev in issues
        ]
    )


def _issues(*severities):
    return [CritiqueIssue(quote=f"q{i}", severity=s) for i, s in enumerate(severities)]


@pytest.mark.parametrize("reply", ["[]", "PASS", "  pass. ", "```json\n[]\n```"])
def test_parse_critique_empty(reply):
    assert parse_critique(reply) == []


def test_parse_critique_structured_with_lenient_fields():
    reply = 'Findings:\n[{"quote": "x = 3", "type": "Weird", "fix": "x = 4", "severity": "CRITICAL"}]'
    (issue,) = parse_critique(reply)
    assert issue.quote == "x = 3"
    assert issue.issue_type == IssueType.UNCLEAR
    assert issue.fix == "x = 4"
    assert issue.severity == Severity.CRITICAL


def test_parse_critique_unreadable_becomes_one_unstructured_issue():
    (issue,) = parse_critique("The second paragraph is wrong about TCP.")
    assert not issue.structured
    assert "TCP" in issue.fix
    (quoteless,) = parse_critique('[{"type": "unclear", "correction": "be clearer"}]')
    assert not quoteless.structured


def test_drop_applied_normalizes_whitespace():
    issues = [CritiqueIssue(quote="the  rate is\n5%"), CritiqueIssue(quote="other")]
    assert [i.quote for i in drop_applied(issues, ["the rate is 5%"])] == ["other"]


def test_scale_extrinsic_scales_then_caps():
    kept = scale_extrinsic(_issues(*[Severity.MAJOR] * 5), alpha=0.5, cap=2)
    assert len(kept) == 2
    assert len(scale_extrinsic(_issues(*[Severity.MAJOR] * 5), alpha=0.5, cap=5)) == 3
    assert len(scale_extrinsic(_issues(Severity.MAJOR), alpha=0.1)) == 1


def test_scale_extrinsic_orders_and_filters_by_severity():
    issues = _issues(Severity.MINOR, Severity.MAJOR, Severity.CRITICAL)
    kept = scale_extrinsic(issues, alpha=1.0, floor=Severity.MAJOR, cap=5)
    assert [i.severity for i in kept] == [Severity.CRITICAL, Severity.MAJOR]
    assert scale_extrinsic(_issues(Severity.MINOR, Severity.MINOR), alpha=1.0) == []
    with pytest.raises(ConfigValidationError):
        scale_extrinsic(issues, alpha=0.0)


def test_iteration_state_rejects_regressions():
    state = IterationState.start("a", 0.70)
    assert state.offer("b", 0.60, ["q"]) is False
    assert state.best_score == 0.70
    assert state.applied_corrections == set()
    assert state.offer("c", 0.70, ["q"]) is True
    assert state.applied_corrections == {"q"}


def test_harq_cc_stops_at_threshold(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.9000"])
    record = run_harq_cc(gen, "task", max_rounds=5, tau=0.85, context=context)
    assert record.rounds == 1
    assert record.call_count == 1
    assert len(record.judge_outputs) == 1
    assert record.metadata["stop_reason"] == "threshold"


def test_harq_cc_tau_zero_always_one_round(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.1000"])
    assert run_harq_cc(gen, "task", tau=0.0, context=context).rounds == 1


def test_harq_cc_guard_keeps_best_attempt(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.5000"])
    synth = scripted_channel("synth", ["Q=0.4500 combined"])
    record = run_harq_cc(gen, "task", max_rounds=5, synthesizer=synth, context=context)
    assert record.rounds == 5
    assert record.final_quality == pytest.approx(0.5)
    assert "best_of_sequence_revert" in record.flags
    assert "[ATTEMPT-5]" in synth.backend.prompts[0]


def test_harq_cc_synthesis_accepted(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.5000", "Q=0.6000", "Q=0.5500"])
    synth = scripted_channel("synth", ["Q=0.7000 combined"])
    record = run_harq_cc(gen, "task", max_rounds=3, synthesizer=synth, context=context)
    assert record.final_quality == pytest.approx(0.7)
    assert record.combined_text == "Q=0.7000 combined"


def test_harq_ir_first_round_meets_threshold(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.9000"])
    critic = scripted_channel("critic", ["[]"])
    record = run_harq_ir(gen, critic, "task", tau=0.85, context=context)
    assert record.rounds == 1
    assert record.call_count == 1
    assert critic.backend.calls == 0


def test_harq_ir_early_exit_on_clean_critique(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.8000"])
    critic = scripted_channel("critic", ["[]"])
    record = run_harq_ir(gen, critic, "task", tau=0.85, early_exit=True, context=context)
    assert record.metadata["stop_reason"] == "early_exit"
    assert gen.backend.calls == 1


def test_harq_ir_polishes_without_early_exit(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.7000", "Q=0.9000 polished"])
    critic = scripted_channel("critic", ["PASS"])
    record = run_harq_ir(gen, critic, "task", max_rounds=5, tau=0.85, context=context)
    assert record.metadata["stop_reason"] == "threshold"
    assert record.rounds == 2
    assert record.final_quality == pytest.approx(0.9)


def test_harq_ir_rejects_worse_candidate(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.7000 first", "Q=0.6000 second"])
    critic = scripted_channel("critic", [_critique(("first", "major"))])
    record = run_harq_ir(gen, critic, "task", max_rounds=2, context=context)
    assert record.final_quality == pytest.approx(0.7)
    assert record.combined_text == "Q=0.7000 first"
    assert record.metadata["accepted"] == [True, False]
    assert '"first"' in gen.backend.prompts[1]


def test_harq_ir_plateau_break(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.7000", "Q=0.7100", "Q=0.7150"])
    critic = scripted_channel("critic", [_critique(("Q", "major"))])
    record = run_harq_ir(gen, critic, "task", max_rounds=5, tau=0.95, early_exit=True, context=context)
    assert record.metadata["stop_reason"] == "plateau"
    assert record.metadata["score_history"] == pytest.approx([0.70, 0.71])


def test_turbo_no_corrections_below_severity_floor(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.6000"])
    critic = scripted_channel("critic", [_critique(("a", "minor"), ("b", "minor"))])
    record = run_turbo(gen, critic, "task", max_iterations=2, context=context)
    assert "no_corrections" in record.flags
    assert gen.backend.calls == 1
    assert record.metadata["stop_reason"] == "max_iterations"


def test_turbo_divergence_halves_alpha_and_stops(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.7000 start", "Q=0.6000", "Q=0.5000"])
    critic = scripted_channel("critic", [_critique(("start", "critical"))])
    record = run_turbo(gen, critic, "task", max_iterations=5, alpha0=0.5, context=context)
    assert record.metadata["stop_reason"] == "divergence"
    assert record.metadata["alpha_history"] == pytest.approx([0.5, 0.25, 0.125])
    assert record.final_quality == pytest.approx(0.7)


def test_turbo_rotates_lenses(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.5000", "Q=0.5500", "Q=0.6000", "Q=0.6500"])
    critic = scripted_channel("critic", [_critique(("Q", "major"))])
    run_turbo(gen, critic, "task", max_iterations=3, tau=0.99, context=context)
    assert critic.backend.calls == 3
    assert len(set(critic.backend.prompts)) == 3


def test_turbo_threshold_on_initial_answer(scripted_channel, context):
    gen = scripted_channel("gen", ["Q=0.9500"])
    record = run_turbo(gen, None, "task", tau=0.9, context=context)
    assert record.rounds == 1
    assert record.metadata["stop_reason"] == "threshold"


def test_turbo_validates_alpha(scripted_channel, context):
    with pytest.raises(ConfigValidationError):
        run_turbo(scripted_channel("g", ["Q=0.5"]), None, "task", alpha0=0.05, context=context)


def test_self_refine_returns_last_iteration(scripted_channel, context):
    gen = scripted_channel(
        "gen", ["Q=0.8000", "fb", "Q=0.7000", "fb", "Q=0.6000", "fb", "Q=0.5000"]
    )
    record = run_self_refine(gen, "task", rounds=3, context=context)
    assert record.final_quality == pytest.approx(0.5)
    assert record.rounds == 4
    assert gen.backend.temperatures[1] == pytest.approx(0.2)
    assert len(record.judge_outputs) == 1
