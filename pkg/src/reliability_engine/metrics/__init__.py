"""Kennzahlen und Statistik über gepaarte Läufe."""

from .statistics import (
    bootstrap_ci,
    branch_correlation,
    coding_gain_and_efficiency,
    cost_overhead,
    effective_diversity,
    oracle_gap_decomposition,
    pareto_frontier,
    wilcoxon_signed_rank,
)

__all__ = [
    "bootstrap_ci",
    "branch_correlation",
    "coding_gain_and_efficiency",
    "cost_overhead",
    "effective_diversity",
    "oracle_gap_decomposition",
    "pareto_frontier",
    "wilcoxon_signed_rank",
]
