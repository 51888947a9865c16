"""Tests der Auswertungsstatistik."""

import itertools

import numpy as np
import pytest

from reliability_engine.exceptions import ConfigValidationError
from reliability_engine.metrics.metrics_models import PairedSample, WilcoxonMethod
from reliability_engine.metrics.statistics import (
    aggregate_cost_overhead,
    bootstrap_ci,
    branch_correlation,
    coding_gain_and_efficiency,
    cohen_dz,
    cost_overhead,
    effective_diversity,
    oracle_gap_decomposition,
    pareto_frontier,
    pareto_mask,
    signed_rank_test,
    wilcoxon_signed_rank,
    win_rate,
)


def _pairs(technique, baseline):
    return [
        PairedSample(task_id=f"t{i}", technique_value=t, baseline_value=b)
        for i, (t, b) in enumerate(zip(technique, baseline))
    ]


def test_cost_overhead():
    assert cost_overhead(0.006, 0.003) == pytest.approx(2.0)
    assert cost_overhead(0.003, 0.003) == 1.0
    with pytest.raises(ConfigValidationError):
        cost_overhead(0.001, 0.0)


def test_aggregate_cost_overhead_is_mean_of_ratios():
    assert aggregate_cost_overhead([(0.002, 0.001)] * 4) == pytest.approx(2.0)
    assert aggregate_cost_overhead([(0.002, 0.001), (0.004, 0.004)]) == pytest.approx(1.5)


def test_coding_gain_and_efficiency():
    paired = _pairs([0.76, 0.70, 0.64], [0.70, 0.64, 0.58])
    result = coding_gain_and_efficiency(paired, rho=2.0)
    assert result.gain == pytest.approx(0.06)
    assert result.efficiency == pytest.approx(0.03)

    same = coding_gain_and_efficiency(_pairs([0.5, 0.6], [0.5, 0.6]), costs=[(1.0, 1.0)] * 2)
    assert same.gain == 0.0
    assert same.efficiency == 0.0
    assert same.rho == 1.0


def test_effective_diversity():
    assert effective_diversity(2, 0.489) == pytest.approx(1.343, abs=1e-3)
    assert effective_diversity(3, 0.0) == 3.0
    assert effective_diversity(2, 1.0) == 1.0
    assert effective_diversity(4, -0.3) == 4.0


def test_branch_correlation_extremes():
    xs = [0.1, 0.4, 0.5, 0.9, 0.7]
    assert branch_correlation([(x, 2 * x + 0.1) for x in xs], n_boot=200).r == pytest.approx(1.0)
    assert branch_correlation([(x, -x) for x in xs], n_boot=200).r == pytest.approx(-1.0)


def test_branch_correlation_undefined_without_variance():
    result = branch_correlation([(0.5, 0.1), (0.5, 0.7), (0.5, 0.3)])
    assert result.defined is False
    assert result.r is None


def test_branch_correlation_recovers_gaussian_copula():
    rng = np.random.default_rng(11)
    cov = [[1.0, 0.5], [0.5, 1.0]]
    draws = rng.multivariate_normal([0.0, 0.0], cov, size=10_000)
    result = branch_correlation([tuple(row) for row in draws], n_boot=100)
    assert result.r == pytest.approx(0.5, abs=0.03)
    assert result.ci_low <= result.r <= result.ci_high


def test_branch_correlation_needs_three_pairs():
    with pytest.raises(ConfigValidationError):
        branch_correlation([(0.1, 0.2), (0.3, 0.4)])


def test_bootstrap_identical_values_is_degenerate():
    ci = bootstrap_ci({"a": [0.7, 0.7], "b": [0.7]}, n_boot=500)
    assert (ci.mean, ci.lo, ci.hi) == pytest.approx((0.7, 0.7, 0.7))


def test_bootstrap_is_deterministic_per_seed():
    values = {f"t{i}": [0.1 * (i % 7), 0.05 * i % 1] for i in range(20)}
    assert bootstrap_ci(values, seed=3) == bootstrap_ci(values, seed=3)


def test_bootstrap_within_task_spread_widens_interval():
    rng = np.random.default_rng(5)
    centres = rng.uniform(0.4, 0.6, size=30)
    grouped = [[c - 0.3, c + 0.3] for c in centres]
    collapsed = [[c] for c in centres]
    wide = bootstrap_ci(grouped, seed=1)
    narrow = bootstrap_ci(collapsed, seed=1)
    assert wide.mean == pytest.approx(narrow.mean)
    assert wide.hi - wide.lo > narrow.hi - narrow.lo


def _brute_force_p(differences):
    from scipy.stats import rankdata

    ranks = rankdata(np.abs(differences))
    observed = ranks[np.asarray(differences) > 0].sum()
    totals = [
        sum(r for r, positive in zip(ranks, signs) if positive)
        for signs in itertools.product([False, True], repeat=len(ranks))
    ]
    lower = sum(1 for t in totals if t <= observed + 1e-9)
    upper = sum(1 for t in totals if t >= observed - 1e-9)
    return min(1.0, 2 * min(lower, upper) / len(totals))


def test_wilcoxon_exact_matches_enumeration():
    differences = [0.12, -0.03, 0.08, 0.15, -0.07, 0.04, 0.11, 0.02, -0.01, 0.09]
    result = signed_rank_test(differences)
    assert result.method == WilcoxonMethod.EXACT
    assert result.n_nonzero == 10
    assert result.p_value == pytest.approx(_brute_force_p(differences))
    assert result.statistic == pytest.approx(min(result.w_plus, 55 - result.w_plus))


def test_wilcoxon_exact_with_ties_matches_enumeration():
    differences = [0.1, -0.1, 0.2, 0.2, 0.3, -0.05, 0.05, 0.4]
    assert signed_rank_test(differences).p_value == pytest.approx(_brute_force_p(differences))


def test_wilcoxon_all_zero_is_degenerate():
    result = wilcoxon_signed_rank(_pairs([0.5, 0.6, 0.7], [0.5, 0.6, 0.7]))
    assert result.degenerate
    assert result.p_value == 1.0
    assert result.statistic is None


def test_wilcoxon_large_sample_uses_normal_approximation():
    rng = np.random.default_rng(2)
    differences = list(rng.normal(0.1, 0.1, size=60))
    result = signed_rank_test(differences)
    assert result.method == WilcoxonMethod.NORMAL
    assert 0.0 <= result.p_value < 0.01


def test_wilcoxon_rejects_duplicate_pairing():
    paired = _pairs([0.5, 0.6], [0.4, 0.5])
    with pytest.raises(ConfigValidationError):
        wilcoxon_signed_rank(paired + paired[:1])


def test_cohen_dz_and_win_rate():
    assert cohen_dz([0.1, 0.1]) is None
    assert cohen_dz([0.1, 0.3]) == pytest.approx(0.2 / np.std([0.1, 0.3], ddof=1))
    assert win_rate([0.1, 0.0, -0.2, 0.3]) == 0.5


def test_pareto_frontier():
    assert pareto_frontier([(1, 0.5), (2, 0.7), (3, 0.6)]) == [(1, 0.5), (2, 0.7)]
    assert pareto_frontier([(1, 0.5)]) == [(1, 0.5)]
    assert pareto_mask([(1, 0.5), (1, 0.5)]) == [True, False]


def test_gap_decomposition_telescopes():
    gaps = oracle_gap_decomposition(0.912, 0.877, 0.874, 0.694, 0.753)
    assert gaps.info_gap == pytest.approx(0.035)
    assert gaps.generalization_gap == pytest.approx(0.003)
    assert gaps.policy_gap == pytest.approx(0.180)
    assert gaps.realization_gap == pytest.approx(-0.059)
    assert gaps.total == pytest.approx(0.159)

    flat = oracle_gap_decomposition(*([0.8] * 5))
    assert flat.total == 0.0

    rng = np.random.default_rng(0)
    values = rng.uniform(size=5)
    assert oracle_gap_decomposition(*values).total == pytest.approx(values[0] - values[-1])
