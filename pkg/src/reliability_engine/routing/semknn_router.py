"""Kostenbewusster semantischer KNN-Router mit Lagrange-Knopf λ.

π*(x; λ) = argmax_i ( q̄_i(x) − λ · ρ̄_i(x) ),  ρ = Kosten / Baseline-Kosten,
gemittelt über die k nächsten Cache-Einträge (Kosinus-Distanz).
"""

import logging
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from ..exceptions import ConfigValidationError
from .routing_models import CacheEntry

logger = logging.getLogger(__name__)

DEFAULT_K = 20


class TechniqueEstimate(BaseModel):
    """Nachbarschaftsmittel einer Technik."""

    technique: str
    quality: float
    normalized_cost: float
    objective: float
    support: int = Field(..., ge=1, description="Nachbarn mit dieser Technik")


class LambdaSweepRow(BaseModel):
    lam: float = Field(..., ge=0)
    mean_quality: float
    mean_cost: float
    mean_normalized_cost: float
    predicted_normalized_cost: float = Field(..., description="Mittleres ρ̄ der gewählten Technik")
    choices: Dict[str, int] = Field(default_factory=dict)


def _matrix(cache: Sequence[CacheEntry]) -> np.ndarray:
    dims = {len(e.embedding) for e in cache}
    if len(dims) != 1:
        raise ConfigValidationError(f"Uneinheitliche Embedding-Dimensionen im Cache: {sorted(dims)}")
    return np.asarray([e.embedding for e in cache], dtype=float)


def nearest_neighbors(
    cache: Sequence[CacheEntry], embedding: Sequence[float], k: int = DEFAULT_K
) -> List[int]:
    """Indizes der k nächsten Einträge nach Kosinus-Distanz (stabil bei Gleichstand)."""
    if not cache:
        raise ConfigValidationError("Router-Cache ist leer")
    if k < 1:
        raise ConfigValidationError("k muss >= 1 sein")
    matrix = _matrix(cache)
    query = np.asarray(embedding, dtype=float)
    if query.shape != (matrix.shape[1],):
        raise ConfigValidationError(
            f"Embedding-Dimension {query.size} passt nicht zum Cache ({matrix.shape[1]})"
        )
    norms = np.linalg.norm(matrix, axis=1) * max(np.linalg.norm(query), 1e-12)
    cosine = matrix @ query / np.maximum(norms, 1e-12)
    distance = 1.0 - cosine
    order = np.argsort(distance, kind="stable")
    return [int(i) for i in order[:k]]


def semknn_scores(
    cache: Sequence[CacheEntry],
    embedding: Sequence[float],
    lam: float,
    k: int = DEFAULT_K,
) -> List[TechniqueEstimate]:
    """Nachbarschaftsmittel und Zielfunktion je Technik, bestes zuerst."""
    if lam < 0:
        raise ConfigValidationError(f"λ muss >= 0 sein, war {lam}")
    neighbors = [cache[i] for i in nearest_neighbors(cache, embedding, k)]
    qualities: Dict[str, List[float]] = {}
    costs: Dict[str, List[float]] = {}
    for entry in neighbors:
        for technique, outcome in entry.per_technique.items():
            qualities.setdefault(technique, []).append(outcome.quality)
            costs.setdefault(technique, []).append(entry.normalized_cost(technique))

    estimates = []
    for technique in qualities:
        q = math.fsum(qualities[technique]) / len(qualities[technique])
        rho = math.fsum(costs[technique]) / len(costs[technique])
        estimates.append(
            TechniqueEstimate(
                technique=technique,
                quality=q,
                normalized_cost=rho,
                objective=q - lam * rho,
                support=len(qualities[technique]),
            )
        )
    # Gleichstand → günstigere Technik, dann Name
    estimates.sort(key=lambda e: (-e.objective, e.normalized_cost, e.technique))
    return estimates


def semknn_dispatch(
    cache: Sequence[CacheEntry],
    embedding: Sequence[float],
    lam: float,
    k: int = DEFAULT_K,
) -> str:
    """Technik mit maximalem q̄ − λ·ρ̄ über die k nächsten Nachbarn."""
    return semknn_scores(cache, embedding, lam, k)[0].technique


def _without(cache: Sequence[CacheEntry], task_id: str) -> List[CacheEntry]:
    return [e for e in cache if e.task_id != task_id]


def dispatch_all(
    cache: Sequence[CacheEntry],
    tasks: Sequence[CacheEntry],
    lam: float,
    k: int = DEFAULT_K,
    leave_one_out: bool = True,
) -> List[Tuple[str, float]]:
    """(gewählte Technik, vorhergesagtes ρ̄) je Aufgabe; LOO schließt die Aufgabe selbst aus."""
    results = []
    for task in tasks:
        pool = _without(cache, task.task_id) if leave_one_out else list(cache)
        candidates = [
            e for e in semknn_scores(pool, task.embedding, lam, k) if e.technique in task.per_technique
        ]
        if not candidates:
            raise ConfigValidationError(f"Keine gemeinsame Technik für {task.task_id}")
        results.append((candidates[0].technique, candidates[0].normalized_cost))
    return results


def lambda_sweep(
    cache: Sequence[CacheEntry],
    tasks: Sequence[CacheEntry],
    lambdas: Sequence[float],
    k: int = DEFAULT_K,
    leave_one_out: bool = True,
) -> List[LambdaSweepRow]:
    """Ein Dispatch-Durchlauf je λ mit identischem Cache und k.

    Die realisierte Qualität und Kosten stammen aus den Cache-Werten der
    jeweiligen Aufgabe; ``predicted_normalized_cost`` ist monoton fallend in λ.
    """
    if not lambdas:
        raise ConfigValidationError("λ-Liste darf nicht leer sein")
    if not tasks:
        raise ConfigValidationError("Task-Menge darf nicht leer sein")
    rows = []
    for lam in lambdas:
        choices = dispatch_all(cache, tasks, lam, k, leave_one_out)
        qualities = [t.per_technique[c].quality for t, (c, _) in zip(tasks, choices)]
        costs = [t.per_technique[c].cost for t, (c, _) in zip(tasks, choices)]
        normalized = [t.normalized_cost(c) for t, (c, _) in zip(tasks, choices)]
        counts: Dict[str, int] = {}
        for technique, _ in choices:
            counts[technique] = counts.get(technique, 0) + 1
        n = len(tasks)
        rows.append(
            LambdaSweepRow(
                lam=lam,
                mean_quality=math.fsum(qualities) / n,
                mean_cost=math.fsum(costs) / n,
                mean_normalized_cost=math.fsum(normalized) / n,
                predicted_normalized_cost=math.fsum(p for _, p in choices) / n,
                choices=counts,
            )
        )
        logger.debug(f"λ={lam}: q̄={rows[-1].mean_quality:.4f}, c̄={rows[-1].mean_cost:.6f}")
    return rows


def sweep_frame(rows: Sequence[LambdaSweepRow]) -> pd.DataFrame:
    """Sweep-Tabelle als DataFrame (ohne Wahl-Häufigkeiten)."""
    return pd.DataFrame([r.dict(exclude={"choices"}) for r in rows])


def oracle_choice(entry: CacheEntry, lam: float = 0.0) -> str:
    """Bester Eintrag nach q − λ·ρ mit den Werten der Aufgabe selbst."""
    return min(
        entry.per_technique,
        key=lambda t: (
            -(entry.per_technique[t].quality - lam * entry.normalized_cost(t)),
            entry.per_technique[t].cost,
            t,
        ),
    )


__all__ = [
    "LambdaSweepRow",
    "TechniqueEstimate",
    "dispatch_all",
    "lambda_sweep",
    "nearest_neighbors",
    "oracle_choice",
    "semknn_dispatch",
    "semknn_scores",
    "sweep_frame",
]
