"""Diversitäts-Kombinierer: SC, MRC, EGC und diskrete Mehrheitsvarianten."""

from .diversity_combiner import (
    run_baseline,
    run_best_of_n,
    run_egc,
    run_mrc,
    run_mrc_discrete_n,
    run_mrc_discrete_n_soft,
    run_sc,
    run_sc_n,
    run_self_consistency,
    run_soft_mrc,
)
from .diversity_models import BranchResult, CombiningMode

__all__ = [
    "BranchResult",
    "CombiningMode",
    "run_baseline",
    "run_best_of_n",
    "run_egc",
    "run_mrc",
    "run_mrc_discrete_n",
    "run_mrc_discrete_n_soft",
    "run_sc",
    "run_sc_n",
    "run_self_consistency",
    "run_soft_mrc",
]
