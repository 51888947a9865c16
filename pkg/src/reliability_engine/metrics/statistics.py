"""Kennzahlen und Tests für den Vergleich von Techniken und Routing-Policies.

Alle Funktionen sind rein; Zufall nur über explizite Seeds.
"""

import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ..exceptions import ConfigValidationError
from .metrics_models import (
    BootstrapInterval,
    CodingGain,
    CorrelationEstimate,
    GapDecomposition,
    PairedSample,
    WilcoxonMethod,
    WilcoxonResult,
)

logger = logging.getLogger(__name__)

DEFAULT_N_BOOT = 4000
EXACT_WILCOXON_MAX_N = 25
ZERO_DIFFERENCE_TOL = 1e-12

GroupedValues = Union[Mapping[str, Sequence[float]], Sequence[Sequence[float]]]


# ---------------------------------------------------------------------------
# Kosten und Gewinn
# ---------------------------------------------------------------------------


def cost_overhead(technique_cost: float, baseline_cost: float) -> float:
    """ρ = Technikkosten / Baseline-Kosten einer Aufgabe."""
    if baseline_cost <= 0:
        raise ConfigValidationError(f"Baseline-Kosten müssen > 0 sein, waren {baseline_cost}")
    if technique_cost < 0:
        raise ConfigValidationError(f"Negative Technikkosten: {technique_cost}")
    return technique_cost / baseline_cost


def aggregate_cost_overhead(costs: Sequence[Tuple[float, float]]) -> float:
    """Mittel der Verhältnisse je Aufgabe, nicht Verhältnis der Mittel."""
    if not costs:
        raise ConfigValidationError("Keine Kostenpaare")
    return math.fsum(cost_overhead(t, b) for t, b in costs) / len(costs)


def coding_gain_and_efficiency(
    paired: Sequence[PairedSample],
    costs: Optional[Sequence[Tuple[float, float]]] = None,
    rho: Optional[float] = None,
) -> CodingGain:
    """G = mittlere gepaarte Qualitätsdifferenz, η = G/ρ.

    ρ kommt entweder direkt oder als Mittel der (Technik, Baseline)-Kostenpaare.
    """
    if not paired:
        raise ConfigValidationError("Keine gepaarten Werte")
    if rho is None:
        if costs is None:
            raise ConfigValidationError("Entweder costs oder rho angeben")
        rho = aggregate_cost_overhead(costs)
    if rho <= 0:
        raise ConfigValidationError(f"ρ muss > 0 sein, war {rho}")
    gain = math.fsum(p.difference for p in paired) / len(paired)
    return CodingGain(gain=gain, efficiency=gain / rho, rho=rho)


def effective_diversity(d: int, r: float) -> float:
    """d_eff = d / (1 + (d−1)·max(r, 0))."""
    if d < 1:
        raise ConfigValidationError("d muss >= 1 sein")
    return d / (1.0 + (d - 1) * max(r, 0.0))


# ---------------------------------------------------------------------------
# Korrelation und Bootstrap
# ---------------------------------------------------------------------------


def _pearson(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return None
    r = float(np.corrcoef(a, b)[0, 1])
    return min(1.0, max(-1.0, r))


def branch_correlation(
    pairs: Sequence[Tuple[float, float]],
    n_boot: int = 2000,
    level: float = 0.95,
    seed: int = 0,
) -> CorrelationEstimate:
    """Pearson-r der Einzelscores zweier Zweige, Bootstrap-CI auf Aufgabenebene."""
    if len(pairs) < 3:
        raise ConfigValidationError("Korrelation braucht mindestens 3 Paare")
    data = np.asarray(pairs, dtype=float)
    a, b = data[:, 0], data[:, 1]
    r = _pearson(a, b)
    if r is None:
        logger.warning("Branch-Korrelation undefiniert: ein Zweig ohne Varianz")
        return CorrelationEstimate(n=len(pairs), defined=False)

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(pairs), size=(n_boot, len(pairs)))
    samples = [_pearson(a[row], b[row]) for row in idx]
    valid = np.asarray([s for s in samples if s is not None])
    if valid.size == 0:
        return CorrelationEstimate(r=r, n=len(pairs))
    lo, hi = np.percentile(valid, [50 * (1 - level), 50 * (1 + level)])
    return CorrelationEstimate(r=r, ci_low=float(lo), ci_high=float(hi), n=len(pairs))


def _groups(values: GroupedValues) -> List[np.ndarray]:
    groups = list(values.values()) if isinstance(values, Mapping) else list(values)
    if not groups:
        raise ConfigValidationError("Bootstrap braucht mindestens eine Aufgabe")
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if any(g.size == 0 for g in arrays):
        raise ConfigValidationError("Aufgabe ohne Wiederholungen im Bootstrap")
    return arrays


def bootstrap_ci(
    values: GroupedValues,
    n_boot: int = DEFAULT_N_BOOT,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapInterval:
    """Zweistufiger Perzentil-Bootstrap: Aufgaben mit Zurücklegen, dann je eine Wiederholung.

    Punktschätzer ist das Mittel der Aufgabenmittel.

    Args:
        values: Werte je Aufgabe (Mapping task_id → Wiederholungen oder Liste von Listen)
        n_boot: Anzahl Resamples
        level: Konfidenzniveau
        seed: Seed des Generators; gleicher Seed → identisches Intervall

    Returns:
        BootstrapInterval(mean, lo, hi)
    """
    if not 0 < level < 1:
        raise ConfigValidationError(f"level muss in (0,1) liegen, war {level}")
    groups = _groups(values)
    n_tasks = len(groups)
    sizes = np.asarray([g.size for g in groups])
    padded = np.full((n_tasks, int(sizes.max())), np.nan)
    for i, g in enumerate(groups):
        padded[i, : g.size] = g

    rng = np.random.default_rng(seed)
    task_idx = rng.integers(0, n_tasks, size=(n_boot, n_tasks))
    repeat_idx = np.floor(rng.random((n_boot, n_tasks)) * sizes[task_idx]).astype(int)
    boot_means = padded[task_idx, repeat_idx].mean(axis=1)

    mean = math.fsum(float(g.mean()) for g in groups) / n_tasks
    lo, hi = np.percentile(boot_means, [50 * (1 - level), 50 * (1 + level)])
    return BootstrapInterval(mean=mean, lo=float(lo), hi=float(hi), level=level, n_boot=n_boot)


# ---------------------------------------------------------------------------
# Wilcoxon
# ---------------------------------------------------------------------------


def paired_differences(paired: Sequence[PairedSample]) -> List[float]:
    keys = [(p.task_id, p.repeat_index) for p in paired]
    if len(set(keys)) != len(keys):
        raise ConfigValidationError("Doppelte Paarung (task_id, repeat_index)")
    return [p.difference for p in paired]


def _exact_p(doubled_ranks: Sequence[int], doubled_w_plus: int) -> float:
    """Exakte Nullverteilung von W+ per Zähl-DP über doppelte (ganzzahlige) Ränge."""
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for rank in doubled_ranks:
        for s in range(total, rank - 1, -1):
            counts[s] += counts[s - rank]
    n_assign = 2 ** len(doubled_ranks)
    lower = sum(counts[: doubled_w_plus + 1])
    upper = sum(counts[doubled_w_plus:])
    return min(1.0, 2 * min(lower, upper) / n_assign)


def signed_rank_test(differences: Sequence[float]) -> WilcoxonResult:
    """Wilcoxon-Test auf rohen Differenzen; Null-Differenzen werden verworfen."""
    nonzero = np.asarray([d for d in differences if abs(d) > ZERO_DIFFERENCE_TOL], dtype=float)
    n = nonzero.size
    if n == 0:
        logger.warning("Wilcoxon: alle Differenzen null, W undefiniert")
        return WilcoxonResult(p_value=1.0, n_nonzero=0, method=WilcoxonMethod.DEGENERATE)

    ranks = stats.rankdata(np.abs(nonzero))
    w_plus = float(ranks[nonzero > 0].sum())
    w_minus = float(ranks[nonzero < 0].sum())

    if n <= EXACT_WILCOXON_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        p = _exact_p(doubled, int(round(2 * w_plus)))
        method = WilcoxonMethod.EXACT
    else:
        _, tie_counts = np.unique(ranks, return_counts=True)
        mean = n * (n + 1) / 4
        var = n * (n + 1) * (2 * n + 1) / 24 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48
        if var <= 0:
            p = 1.0
        else:
            z = (w_plus - mean) / math.sqrt(var)
            p = float(min(1.0, 2 * stats.norm.sf(abs(z))))
        method = WilcoxonMethod.NORMAL

    return WilcoxonResult(
        statistic=min(w_plus, w_minus), w_plus=w_plus, p_value=p, n_nonzero=n, method=method
    )


def wilcoxon_signed_rank(paired: Sequence[PairedSample]) -> WilcoxonResult:
    """Gepaarter zweiseitiger Wilcoxon-Test Technik gegen Baseline.

    Exakt für n ≤ 25 (nach Verwerfen der Nullen), sonst Normalapproximation
    mit Bindungskorrektur.
    """
    return signed_rank_test(paired_differences(paired))


def cohen_dz(differences: Sequence[float]) -> Optional[float]:
    """Mittel / Standardabweichung (ddof 1) der Differenzen; None wenn undefiniert."""
    if len(differences) < 2:
        return None
    sd = float(np.std(differences, ddof=1))
    if sd == 0:
        return None
    return float(np.mean(differences)) / sd


def win_rate(differences: Sequence[float]) -> float:
    """Anteil streng positiver Differenzen."""
    if not differences:
        raise ConfigValidationError("Keine Differenzen")
    return sum(1 for d in differences if d > 0) / len(differences)


# ---------------------------------------------------------------------------
# Pareto und Lückenzerlegung
# ---------------------------------------------------------------------------


def pareto_mask(points: Sequence[Tuple[float, float]]) -> List[bool]:
    """True für Punkte auf der (Kosten ↓, Qualität ↑)-Front; Duplikate nur einmal."""
    order = sorted(range(len(points)), key=lambda i: (points[i][0], -points[i][1], i))
    mask = [False] * len(points)
    best_quality = -math.inf
    for i in order:
        if points[i][1] > best_quality:
            mask[i] = True
            best_quality = points[i][1]
    return mask


def pareto_frontier(points: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Nicht dominierte (Kosten, Qualität)-Punkte, nach Kosten sortiert."""
    mask = pareto_mask(points)
    return sorted((p for p, keep in zip(points, mask) if keep), key=lambda p: p[0])


def oracle_gap_decomposition(
    oracle_q: float,
    feasible_q: float,
    learned_cv_q: float,
    sim_q: float,
    realized_q: float,
) -> GapDecomposition:
    """Teleskop-Zerlegung von Orakel − realisiert in vier Lücken."""
    return GapDecomposition(
        info_gap=oracle_q - feasible_q,
        generalization_gap=feasible_q - learned_cv_q,
        policy_gap=learned_cv_q - sim_q,
        realization_gap=sim_q - realized_q,
    )


def summarize_differences(differences: Sequence[float]) -> Dict[str, Optional[float]]:
    """Abgeleitete Spalten d_z und Win-Rate für Tabellen."""
    return {
        "cohen_dz": cohen_dz(differences),
        "win_rate": win_rate(differences) if differences else None,
    }


__all__ = [
    "aggregate_cost_overhead",
    "bootstrap_ci",
    "branch_correlation",
    "coding_gain_and_efficiency",
    "cohen_dz",
    "cost_overhead",
    "effective_diversity",
    "oracle_gap_decomposition",
    "paired_differences",
    "pareto_frontier",
    "pareto_mask",
    "signed_rank_test",
    "summarize_differences",
    "wilcoxon_signed_rank",
    "win_rate",
]
