"""Vergleich von Routing-Policies auf einem vollständigen Cache (out-of-fold, wo anwendbar)."""

import logging
import math
from collections import defaultdict
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ..core.run_models import RunRecord, TechniqueName
from ..exceptions import ConfigValidationError
from ..metrics.metrics_models import GapDecomposition, PairedSample
from ..metrics.statistics import (
    bootstrap_ci,
    coding_gain_and_efficiency,
    cohen_dz,
    oracle_gap_decomposition,
    pareto_mask,
    signed_rank_test,
    wilcoxon_signed_rank,
    win_rate,
)
from ..routing.acm_router import select_profile
from ..routing.learned_router import fit_logit_router, fit_ridge_router, predict_entry
from ..routing.routing_models import CacheEntry, McsTable, ProfileKey
from ..routing.semknn_router import DEFAULT_K, dispatch_all
from .harness_models import FoldPlan, PolicyRow

logger = logging.getLogger(__name__)

BASELINE = TechniqueName.BASELINE.value
FIXED_BEST_CV = "fixed-best (cv)"
FEASIBLE_K_GRID = (1, 3, 5, 10, 20, 50)
N_DIFFICULTY_BINS = 4

Choices = Dict[str, str]
Chooser = Callable[[List[CacheEntry], List[CacheEntry]], Choices]


# ---------------------------------------------------------------------------
# Folds
# ---------------------------------------------------------------------------


def make_fold_plan(entries: Sequence[CacheEntry], n_folds: int = 5, seed: int = 0) -> FoldPlan:
    """Nach Kategorie stratifizierte Folds auf Aufgabenebene (Round-Robin je Kategorie)."""
    if len(entries) < 2:
        raise ConfigValidationError("Cross-Validation braucht mindestens 2 Aufgaben")
    by_category: Dict[str, List[str]] = defaultdict(list)
    for entry in entries:
        by_category[entry.category].append(entry.task_id)
    rng = np.random.default_rng(seed)
    assignment: Dict[str, int] = {}
    offset = 0
    for category in sorted(by_category):
        ids = sorted(by_category[category])
        for i, task_id in enumerate(rng.permutation(ids).tolist()):
            assignment[task_id] = (offset + i) % n_folds
        offset += len(ids)
    return FoldPlan(n_folds=n_folds, assignment=assignment)


def _out_of_fold(entries: Sequence[CacheEntry], plan: FoldPlan, chooser: Chooser) -> Choices:
    choices: Choices = {}
    for fold in range(plan.n_folds):
        test_ids = set(plan.test_ids(fold))
        test = [e for e in entries if e.task_id in test_ids]
        train = [e for e in entries if e.task_id not in test_ids]
        if not test or not train:
            continue
        choices.update(chooser(train, test))
    return choices


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


def _techniques(entries: Sequence[CacheEntry]) -> List[str]:
    return sorted({t for e in entries for t in e.per_technique})


def fixed_best(entries: Sequence[CacheEntry], covering: Sequence[CacheEntry] = ()) -> str:
    """Technik mit höchster mittlerer Qualität über ``entries``.

    Kandidaten sind nur Techniken, die auf allen ``entries`` und allen
    ``covering``-Aufgaben (auf die die Wahl angewandt wird) im Cache liegen.
    """
    scope = list(entries) + list(covering)
    available = [t for t in _techniques(entries) if all(t in e.per_technique for e in scope)]
    if not available:
        raise ConfigValidationError("Keine Technik deckt alle Aufgaben ab")
    means = {}
    for technique in available:
        values = [e.per_technique[technique].quality for e in entries]
        costs = [e.per_technique[technique].cost for e in entries]
        means[technique] = (math.fsum(values) / len(values), -math.fsum(costs) / len(costs))
    return max(sorted(means), key=lambda t: means[t])


def _fixed_chooser(train: List[CacheEntry], test: List[CacheEntry]) -> Choices:
    best = fixed_best(train, covering=test)
    return {e.task_id: best for e in test}


def _best_or(fallback: str, train: List[CacheEntry], test: List[CacheEntry]) -> str:
    if not train:
        return fallback
    try:
        return fixed_best(train, covering=test)
    except ConfigValidationError:
        return fallback


def _category_chooser(train: List[CacheEntry], test: List[CacheEntry]) -> Choices:
    fallback = fixed_best(train, covering=test)
    choices: Choices = {}
    for category in {e.category for e in test}:
        members = [e for e in test if e.category == category]
        best = _best_or(fallback, [e for e in train if e.category == category], members)
        choices.update({e.task_id: best for e in members})
    return choices


def _difficulty_bins_chooser(train: List[CacheEntry], test: List[CacheEntry]) -> Choices:
    """Quartilsgrenzen auf Train-Schwierigkeiten, Argmax-Technik je Bin."""
    fallback = fixed_best(train, covering=test)
    difficulties = np.asarray([e.difficulty for e in train], dtype=float)
    edges = np.quantile(difficulties, [i / N_DIFFICULTY_BINS for i in range(1, N_DIFFICULTY_BINS)])

    def bin_of(d: float) -> int:
        return int(np.searchsorted(edges, d, side="right"))

    bins: Dict[int, List[CacheEntry]] = defaultdict(list)
    for entry in train:
        bins[bin_of(entry.difficulty)].append(entry)
    return {e.task_id: _best_or(fallback, bins.get(bin_of(e.difficulty), []), [e]) for e in test}


def _router_chooser(kind: str, l2: float) -> Chooser:
    def choose(train: List[CacheEntry], test: List[CacheEntry]) -> Choices:
        categories = sorted({e.category for e in train} | {e.category for e in test})
        if kind == "logit":
            weights = fit_logit_router(train, l2, categories)
        else:
            weights = fit_ridge_router(train, l2, extended=True, categories=categories)
        return {e.task_id: predict_entry(weights, e) for e in test}

    return choose


def _semknn_chooser(lam: float, k: int) -> Chooser:
    def choose(train: List[CacheEntry], test: List[CacheEntry]) -> Choices:
        picks = dispatch_all(train, test, lam, min(k, len(train)), leave_one_out=False)
        return {e.task_id: technique for e, (technique, _) in zip(test, picks)}

    return choose


def _semknn_in_sample(entries: Sequence[CacheEntry], k: int, leave_one_out: bool) -> Choices:
    pool = len(entries) - 1 if leave_one_out else len(entries)
    picks = dispatch_all(entries, entries, 0.0, max(1, min(k, pool)), leave_one_out=leave_one_out)
    return {e.task_id: technique for e, (technique, _) in zip(entries, picks)}


def _mean_quality(entries: Sequence[CacheEntry], choices: Choices) -> float:
    return math.fsum(e.per_technique[choices[e.task_id]].quality for e in entries) / len(entries)


def feasible_choices(entries: Sequence[CacheEntry], k: int = DEFAULT_K) -> Choices:
    """Beste in-sample erreichbare Zuordnung ohne Aufgaben-Orakel.

    Maximum über semKNN bei λ = 0 (in-sample und leave-one-out, k-Gitter plus
    konfiguriertes k) und Fixed-Best in-sample.
    """
    best = fixed_best(entries)
    candidates = [{e.task_id: best for e in entries}]
    for k_value in sorted(set(FEASIBLE_K_GRID) | {k}):
        candidates.append(_semknn_in_sample(entries, k_value, leave_one_out=False))
        if len(entries) > 1:
            candidates.append(_semknn_in_sample(entries, k_value, leave_one_out=True))
    candidates = [c for c in candidates if _covered(entries, c)]
    return max(candidates, key=lambda c: _mean_quality(entries, c))


def simulate_acm(entries: Sequence[CacheEntry], table: McsTable) -> Choices:
    """Hand-MCS-Tabelle auf die gecachten Ergebnisse angewandt (Konfidenz = 1 − d)."""
    choices = {}
    for entry in entries:
        if entry.difficulty is None:
            raise ConfigValidationError(f"ACM-Simulation: {entry.task_id} ohne Pilot-Schwierigkeit")
        value = 1.0 - entry.difficulty if table.key == ProfileKey.CONFIDENCE else entry.difficulty
        choices[entry.task_id] = select_profile(table, value).technique.value
    return choices


# ---------------------------------------------------------------------------
# Tabelle
# ---------------------------------------------------------------------------


def _covered(entries: Sequence[CacheEntry], choices: Choices) -> bool:
    return all(
        e.task_id in choices and choices[e.task_id] in e.per_technique for e in entries
    )


def _repeat_values(
    entries: Sequence[CacheEntry],
    choices: Choices,
    records: Optional[Mapping[str, Sequence[RunRecord]]],
) -> Dict[str, List[float]]:
    index: Dict[tuple, List[float]] = defaultdict(list)
    for technique, items in (records or {}).items():
        for record in items:
            if not record.failed:
                index[(record.task_id, technique)].append(record.final_quality)
    values = {}
    for entry in entries:
        technique = choices[entry.task_id]
        values[entry.task_id] = index.get((entry.task_id, technique)) or [
            entry.per_technique[technique].quality
        ]
    return values


def policy_row(
    name: str,
    entries: Sequence[CacheEntry],
    choices: Choices,
    reference: Optional[Choices] = None,
    records: Optional[Mapping[str, Sequence[RunRecord]]] = None,
    out_of_fold: bool = False,
    n_boot: int = 4000,
    seed: int = 0,
) -> PolicyRow:
    """Kennzahlen einer Policy; Δq, Wilcoxon, d_z und Win-Rate gegen ``reference``."""
    n = len(entries)
    quality = [e.per_technique[choices[e.task_id]].quality for e in entries]
    cost = [e.per_technique[choices[e.task_id]].cost for e in entries]
    rho = [e.normalized_cost(choices[e.task_id]) for e in entries]
    gain = [
        q - e.per_technique[BASELINE].quality if BASELINE in e.per_technique else 0.0
        for q, e in zip(quality, entries)
    ]
    interval = bootstrap_ci(_repeat_values(entries, choices, records), n_boot=n_boot, seed=seed)
    mean_quality = math.fsum(quality) / n
    mean_cost = math.fsum(cost) / n

    delta_q = p_value = dz = wins = None
    if reference is not None:
        diffs = [
            q - e.per_technique[reference[e.task_id]].quality for q, e in zip(quality, entries)
        ]
        delta_q = math.fsum(diffs) / n
        p_value = signed_rank_test(diffs).p_value
        dz = cohen_dz(diffs)
        wins = win_rate(diffs)

    return PolicyRow(
        policy=name,
        mean_quality=mean_quality,
        ci_low=interval.lo,
        ci_high=interval.hi,
        mean_cost=mean_cost,
        quality_per_dollar=mean_quality / mean_cost if mean_cost > 0 else None,
        rho=math.fsum(rho) / n,
        gain=math.fsum(gain) / n,
        delta_q=delta_q,
        wilcoxon_p=p_value,
        cohen_dz=dz,
        win_rate=wins,
        n_tasks=n,
        out_of_fold=out_of_fold,
    )


def policy_choices(
    entries: Sequence[CacheEntry],
    fold_plan: FoldPlan,
    lambdas: Sequence[float],
    k: int = DEFAULT_K,
    l2: float = 1.0,
    mcs_table: Optional[McsTable] = None,
) -> Dict[str, tuple]:
    """Policy-Name → (Zuordnung, out_of_fold) für alle berechenbaren Policies."""
    policies: Dict[str, tuple] = {}
    in_sample_best = fixed_best(entries)
    policies["oracle"] = ({e.task_id: e.best_technique() for e in entries}, False)
    policies["feasible"] = (feasible_choices(entries, k), False)
    for lam in lambdas:
        policies[f"semknn(lam={lam:g})"] = (
            _out_of_fold(entries, fold_plan, _semknn_chooser(lam, k)),
            True,
        )

    has_difficulty = all(e.difficulty is not None for e in entries)
    learned = [("ridge", _router_chooser("ridge", l2)), ("logit", _router_chooser("logit", l2)),
               ("difficulty-bins", _difficulty_bins_chooser)]
    for name, chooser in learned:
        if not has_difficulty:
            logger.warning(f"Policy {name} ausgelassen: Pilot-Schwierigkeiten fehlen")
            continue
        try:
            policies[name] = (_out_of_fold(entries, fold_plan, chooser), True)
        except ConfigValidationError as e:
            logger.warning(f"Policy {name} ausgelassen: {e}")

    policies["category fixed-best"] = (_out_of_fold(entries, fold_plan, _category_chooser), True)
    policies[FIXED_BEST_CV] = (_out_of_fold(entries, fold_plan, _fixed_chooser), True)
    policies["fixed-best (in-sample)"] = ({e.task_id: in_sample_best for e in entries}, False)
    if mcs_table is not None:
        if has_difficulty:
            policies["acm (simulated)"] = (simulate_acm(entries, mcs_table), False)
        else:
            logger.warning("ACM-Simulation ausgelassen: Pilot-Schwierigkeiten fehlen")
    policies["always-baseline"] = ({e.task_id: BASELINE for e in entries}, False)
    return policies


def evaluate_policies(
    entries: Sequence[CacheEntry],
    fold_plan: FoldPlan,
    lambdas: Sequence[float],
    records: Optional[Mapping[str, Sequence[RunRecord]]] = None,
    k: int = DEFAULT_K,
    l2: float = 1.0,
    mcs_table: Optional[McsTable] = None,
    n_boot: int = 4000,
    seed: int = 0,
) -> pd.DataFrame:
    """Policy-Tabelle mit Qualität, Bootstrap-CI, Kosten, ρ, G und Δq gegen Fixed-Best (CV).

    Policies, deren gewählte Technik auf einer Aufgabe nicht im Cache liegt,
    werden mit Warnung ausgelassen.
    """
    if not entries:
        raise ConfigValidationError("Leerer Router-Cache")
    if any(BASELINE not in e.per_technique for e in entries):
        raise ConfigValidationError("Baseline fehlt im Cache")
    policies = policy_choices(entries, fold_plan, lambdas, k, l2, mcs_table)
    reference = policies[FIXED_BEST_CV][0]

    rows = []
    for name, (choices, out_of_fold) in policies.items():
        if not _covered(entries, choices):
            logger.warning(f"Policy {name} ausgelassen: Technik-Abdeckung unvollständig")
            continue
        rows.append(
            policy_row(name, entries, choices, reference, records, out_of_fold, n_boot, seed)
        )
    frame = pd.DataFrame([r.dict() for r in rows])
    frame["on_frontier"] = pareto_mask(list(zip(frame["mean_cost"], frame["mean_quality"])))
    logger.info(f"Policy-Tabelle: {len(frame)} Policies über {len(entries)} Tasks")
    return frame


def gap_decomposition(
    frame: pd.DataFrame,
    realized_quality: float,
    learned_policy: str = "logit",
    simulated_policy: str = "acm (simulated)",
) -> GapDecomposition:
    """Lückenzerlegung aus einer Policy-Tabelle und der realisierten ACM-Qualität."""
    q = frame.set_index("policy")["mean_quality"]
    missing = [p for p in ("oracle", "feasible", learned_policy, simulated_policy) if p not in q]
    if missing:
        raise ConfigValidationError(f"Policy-Tabelle ohne {missing}")
    return oracle_gap_decomposition(
        float(q["oracle"]),
        float(q["feasible"]),
        float(q[learned_policy]),
        float(q[simulated_policy]),
        realized_quality,
    )


def _paired(
    technique: str,
    entries: Sequence[CacheEntry],
    records: Optional[Mapping[str, Sequence[RunRecord]]],
) -> List[PairedSample]:
    """Paare über (task_id, repeat_index) aus den Records, sonst über Aufgabenmittel."""
    ids = {e.task_id for e in entries}
    if records and technique in records and BASELINE in records:
        baseline = {
            (r.task_id, r.repeat_index): r.final_quality
            for r in records[BASELINE]
            if not r.failed
        }
        pairs = [
            PairedSample(
                task_id=r.task_id,
                technique_value=r.final_quality,
                baseline_value=baseline[(r.task_id, r.repeat_index)],
                repeat_index=r.repeat_index,
            )
            for r in records[technique]
            if r.task_id in ids and not r.failed and (r.task_id, r.repeat_index) in baseline
        ]
        if pairs:
            return pairs
    return [
        PairedSample(
            task_id=e.task_id,
            technique_value=e.per_technique[technique].quality,
            baseline_value=e.per_technique[BASELINE].quality,
        )
        for e in entries
        if technique in e.per_technique
    ]


def technique_summary(
    entries: Sequence[CacheEntry],
    records: Optional[Mapping[str, Sequence[RunRecord]]] = None,
    n_boot: int = 4000,
    seed: int = 0,
) -> pd.DataFrame:
    """Je Technik: mittlere Qualität, CI, Kosten, ρ, G, η und Wilcoxon-p gegen Baseline."""
    rows = []
    for technique in _techniques(entries):
        covered = [e for e in entries if technique in e.per_technique]
        choices = {e.task_id: technique for e in covered}
        paired = _paired(technique, covered, records)
        rho = math.fsum(e.normalized_cost(technique) for e in covered) / len(covered)
        coding = coding_gain_and_efficiency(paired, rho=rho) if rho > 0 else None
        interval = bootstrap_ci(_repeat_values(covered, choices, records), n_boot=n_boot, seed=seed)
        diffs = [p.difference for p in paired]
        rows.append(
            {
                "technique": technique,
                "mean_quality": math.fsum(e.per_technique[technique].quality for e in covered)
                / len(covered),
                "ci_low": interval.lo,
                "ci_high": interval.hi,
                "mean_cost": math.fsum(e.per_technique[technique].cost for e in covered)
                / len(covered),
                "rho": rho,
                "gain": coding.gain if coding else math.fsum(d for d in diffs) / len(diffs),
                "efficiency": coding.efficiency if coding else None,
                "wilcoxon_p": wilcoxon_signed_rank(paired).p_value,
                "cohen_dz": cohen_dz(diffs),
                "win_rate": win_rate(diffs),
                "n_tasks": len(covered),
            }
        )
    return pd.DataFrame(rows)


__all__ = [
    "evaluate_policies",
    "technique_summary",
    "feasible_choices",
    "fixed_best",
    "gap_decomposition",
    "make_fold_plan",
    "policy_choices",
    "policy_row",
    "simulate_acm",
]
