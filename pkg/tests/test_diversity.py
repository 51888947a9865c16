"""Tests der Diversitäts-Kombinierer."""

import pytest

from reliability_engine.diversity.diversity_combiner import (
    best_index,
    mrc_weights,
    parse_cluster_labels,
    run_baseline,
    run_best_of_n,
    run_egc,
    run_mrc,
    run_mrc_discrete_n,
    run_sc,
    run_sc_n,
    run_self_consistency,
    run_soft_mrc,
    select_cluster,
)
from reliability_engine.exceptions import (
    AllBranchesFailedError,
    CapabilityError,
    ConfigValidationError,
)


def test_best_index_prefers_lowest_index_on_ties():
    assert best_index([0.8, 0.2]) == 0
    assert best_index([0.5, 0.5]) == 0
    assert best_index([0.1, 0.9, 0.9]) == 1


def test_mrc_weights():
    assert mrc_weights([0.8, 0.2]) == pytest.approx([0.8, 0.2])
    assert mrc_weights([0.0, 0.0]) == [0.5, 0.5]


def test_baseline_is_one_call_plus_judge(scripted_channel, context):
    gen = scripted_channel("a", ["Q=0.6100"])
    record = run_baseline(gen, "Summarize RFC 793", context=context)
    assert record.final_quality == pytest.approx(0.61)
    assert record.call_count == 1
    assert len(record.judge_outputs) == 1


def test_sc_selects_best_branch(scripted_channel, context):
    a, b = scripted_channel("a", ["Q=0.8000"]), scripted_channel("b", ["Q=0.2000"])
    record = run_sc([a, b], "task", context=context)
    assert record.combined_text == "Q=0.8000"
    assert record.individual_scores == pytest.approx([0.8, 0.2])


def test_sc_single_channel_degenerates_to_baseline(scripted_channel, context):
    record = run_sc([scripted_channel("a", ["Q=0.4000"])], "task", context=context)
    assert record.call_count == 1
    assert record.final_quality == pytest.approx(0.4)


def test_mrc_dominance_fast_path_skips_synthesis(scripted_channel, context):
    a, b = scripted_channel("a", ["Q=0.9000"]), scripted_channel("b", ["Q=0.3000"])
    synth = scripted_channel("synth", ["Q=0.9900"])
    record = run_mrc([a, b], "task", synth, context=context)
    assert "dominance_fast_path" in record.flags
    assert record.final_quality == pytest.approx(0.9)
    assert synth.backend.calls == 0


def test_mrc_synthesis_accepted_when_better(scripted_channel, context):
    a, b = scripted_channel("a", ["Q=0.8000"]), scripted_channel("b", ["Q=0.6000"])
    synth = scripted_channel("synth", ["Q=0.8500 merged"])
    record = run_mrc([a, b], "task", synth, context=context)
    assert record.combined_text == "Q=0.8500 merged"
    assert record.final_quality == pytest.approx(0.85)
    assert record.metadata["weights"] == pytest.approx([0.8 / 1.4, 0.6 / 1.4])
    assert "[BEST]" in synth.backend.prompts[0]
    assert synth.backend.temperatures == [0.1]


def test_mrc_synthesis_reverts_when_worse(scripted_channel, context):
    a, b = scripted_channel("a", ["Q=0.8000"]), scripted_channel("b", ["Q=0.6000"])
    synth = scripted_channel("synth", ["Q=0.7500 merged"])
    record = run_mrc([a, b], "task", synth, context=context)
    assert "best_of_sequence_revert" in record.flags
    assert record.final_quality == pytest.approx(0.8)
    assert record.combined_text == "Q=0.8000"


def test_mrc_identity_detection(scripted_channel, context):
    a, b = scripted_channel("a", ["Q=0.8000"]), scripted_channel("b", ["Q=0.6000"])
    synth = scripted_channel("synth", ["  Q=0.8000 "])
    record = run_mrc([a, b], "task", synth, context=context)
    assert "synthesis_identity" in record.flags
    assert record.final_quality == pytest.approx(0.8)


def test_mrc_needs_two_channels(scripted_channel, context):
    with pytest.raises(ConfigValidationError):
        run_mrc([scripted_channel("a", ["Q=0.5"])], "task", scripted_channel("s", ["x"]), context=context)


def test_egc_uses_uniform_weights_without_fast_path(scripted_channel, context):
    a, b = scripted_channel("a", ["Q=0.9000"]), scripted_channel("b", ["Q=0.3000"])
    synth = scripted_channel("synth", ["Q=0.9500"])
    record = run_egc([a, b], "task", synth, context=context)
    assert record.metadata["weights"] == [0.5, 0.5]
    assert synth.backend.calls == 1
    assert record.final_quality == pytest.approx(0.95)


def test_failed_branch_is_skipped(scripted_channel, context):
    a = scripted_channel("a", ["Q=0.5000"], fail=True)
    b = scripted_channel("b", ["Q=0.4000"])
    record = run_sc([a, b], "task", context=context)
    assert "branch_failed" in record.flags
    assert record.final_quality == pytest.approx(0.4)


def test_all_branches_failed(scripted_channel, context):
    channels = [scripted_channel(n, ["Q=0.5"], fail=True) for n in ("a", "b")]
    with pytest.raises(AllBranchesFailedError):
        run_sc(channels, "task", context=context)


def test_sc_n_cycles_channels(scripted_channel, context):
    a = scripted_channel("a", ["Q=0.5000", "Q=0.6000", "Q=0.7000"])
    b = scripted_channel("b", ["Q=0.6500", "Q=0.4000"])
    record = run_sc_n([a, b], "task", n=5, context=context)
    assert record.metadata["channel_sequence"] == [0, 1, 0, 1, 0]
    assert record.final_quality == pytest.approx(0.7)
    assert set(a.backend.temperatures) == {0.7}


def test_best_of_n_ties_return_first_sample(scripted_channel, context):
    gen = scripted_channel("a", lambda prompt: "Q=0.5000")
    record = run_best_of_n(gen, "task", n=4, context=context)
    assert record.technique == "best_of_n"
    assert record.call_count == 4
    assert record.individual_scores == [0.5] * 4


def test_select_cluster_sums_weights():
    assert select_cluster(["a", "a", "b"], [0.4, 0.4, 0.7]) == ("a", 0)
    assert select_cluster(["x", "y", "z"], [0.3, 0.9, 0.5]) == ("y", 1)
    assert select_cluster(["b", "a", "a", "b"], [1.0, 1.0, 1.0, 1.0]) == ("b", 0)


def test_parse_cluster_labels():
    assert parse_cluster_labels('```json\n["A", "a ", 2]\n```', 3) == ["a", "a", "2"]
    assert parse_cluster_labels("[1, 2]", 3) is None
    assert parse_cluster_labels("no idea", 2) is None


def test_discrete_mrc_picks_heaviest_cluster(scripted_channel, context):
    gen = scripted_channel("a", ["Q=0.4000 x=3", "Q=0.4000 x=3", "Q=0.7000 x=5"])
    voter = scripted_channel("voter", ['["A", "A", "B"]'])
    record = run_mrc_discrete_n([gen], "task", n=3, voter=voter, context=context)
    assert record.metadata["cluster"] == "a"
    assert record.final_quality == pytest.approx(0.4)
    assert record.metadata["cluster_source"] == "voter"


def test_discrete_mrc_voter_fallback_matches_sc_n(scripted_channel, context):
    gen = scripted_channel("a", ["Q=0.4000", "Q=0.9000", "Q=0.6000"])
    voter = scripted_channel("voter", ["I think they are all different."])
    record = run_mrc_discrete_n([gen], "task", n=3, voter=voter, context=context)
    assert "voter_fallback" in record.flags
    assert record.final_quality == pytest.approx(0.9)


def test_self_consistency_is_plurality_vote(scripted_channel, context):
    gen = scripted_channel("a", ["Q=0.9000", "Q=0.3000", "Q=0.2000"])
    voter = scripted_channel("voter", ["[1, 2, 2]"])
    record = run_self_consistency([gen], "task", n=3, voter=voter, context=context)
    assert record.technique == "self_consistency"
    assert record.combined_text == "Q=0.3000"
    assert len(record.judge_outputs) == 1


def test_soft_mrc_requires_logprobs(scripted_channel, context):
    a, b = scripted_channel("a", ["Q=0.5"]), scripted_channel("b", ["Q=0.5"])
    with pytest.raises(CapabilityError):
        run_soft_mrc([a, b], "task", scripted_channel("s", ["x"]), context=context)
    assert a.backend.calls == 0


def test_soft_mrc_weights_follow_confidence(scripted_channel, context):
    a = scripted_channel("a", ["Q=0.7000"], confidence=0.8)
    b = scripted_channel("b", ["Q=0.9000"], confidence=0.2)
    synth = scripted_channel("synth", ["Q=0.6000"])
    record = run_soft_mrc([a, b], "task", synth, context=context)
    assert record.metadata["weights"] == pytest.approx([0.8, 0.2])
    assert record.individual_scores == pytest.approx([0.7])
    assert record.final_quality == pytest.approx(0.7)


def test_soft_mrc_marks_most_confident_survivor_as_best(scripted_channel, context):
    dead = scripted_channel("dead", ["Q=0.5000"], confidence=0.5, fail=True)
    a = scripted_channel("a", ["Q=0.4000 a"], confidence=0.3)
    b = scripted_channel("b", ["Q=0.8000 b"], confidence=0.9)
    synth = scripted_channel("synth", ["Q=0.9500 merged"])
    record = run_soft_mrc([dead, a, b], "task", synth, context=context)

    prompt = synth.backend.prompts[0]
    assert "[BEST] (score 0.900, weight 0.750)\nQ=0.8000 b" in prompt
    assert "[ALT-1] (score 0.300, weight 0.250)\nQ=0.4000 a" in prompt
    assert "[ALT-2]" not in prompt
    assert record.final_quality == pytest.approx(0.95)
