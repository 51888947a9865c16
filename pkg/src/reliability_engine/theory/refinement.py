"""Fixpunkt-Dynamik iterativer Verfeinerung q_{k+1} = f(q_k) + Rauschen."""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from ..exceptions import ConfigValidationError
from .theory_models import FixedPointKind, IteratePoint, QualityMap

logger = logging.getLogger(__name__)

DERIVATIVE_STEP = 1e-5
NEUTRAL_BAND = 1e-6


def _clamp(q: float) -> float:
    return min(1.0, max(0.0, q))


def iterate_quality_map(
    qmap: QualityMap,
    q0: float,
    k_max: int,
    noise_sd: float = 0.0,
    with_guard: bool = True,
    seed: Optional[int] = None,
) -> List[IteratePoint]:
    """Trajektorie der Iterate samt laufendem Maximum.

    Das Iterat selbst läuft ungeschützt weiter; ``delivered`` ist mit Guard das
    laufende Maximum, sonst das aktuelle Iterat.

    Args:
        qmap: Update-Abbildung f
        q0: Startqualität in [0,1]
        k_max: Anzahl Verfeinerungsschritte
        noise_sd: Standardabweichung des additiven Rauschens
        with_guard: Best-of-Sequence-Auslieferung
        seed: Seed für das Rauschen

    Returns:
        k_max + 1 Punkte, beginnend bei k = 0
    """
    if not 0.0 <= q0 <= 1.0:
        raise ConfigValidationError(f"q0 muss in [0,1] liegen, war {q0}")
    if k_max < 0 or noise_sd < 0:
        raise ConfigValidationError("k_max und noise_sd müssen >= 0 sein")
    rng = np.random.default_rng(seed)
    q, best = float(q0), float(q0)
    points = [IteratePoint(k=0, iterate=q, running_max=best, delivered=q)]
    for k in range(1, k_max + 1):
        noise = float(rng.normal(0.0, noise_sd)) if noise_sd > 0 else 0.0
        q = _clamp(qmap(q) + noise)
        best = max(best, q)
        points.append(
            IteratePoint(k=k, iterate=q, running_max=best, delivered=best if with_guard else q)
        )
    return points


def trajectory_frame(points: Sequence[IteratePoint]) -> pd.DataFrame:
    return pd.DataFrame([p.dict() for p in points])


def map_derivative(qmap: QualityMap, q: float, step: float = DERIVATIVE_STEP) -> float:
    """Zentrale Differenz; an den Rändern einseitig."""
    lo, hi = max(0.0, q - step), min(1.0, q + step)
    if hi <= lo:
        raise ConfigValidationError("Schrittweite zu klein")
    return (qmap(hi) - qmap(lo)) / (hi - lo)


def fixed_point(qmap: QualityMap, q0: float, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Rauschfreie Iteration bis |q_{k+1} − q_k| < tol."""
    q = _clamp(q0)
    for _ in range(max_iter):
        nxt = qmap(q)
        if abs(nxt - q) < tol:
            return nxt
        q = nxt
    logger.warning(f"Fixpunkt-Iteration ab q0={q0} nach {max_iter} Schritten nicht konvergiert")
    return q


def classify_fixed_point(qmap: QualityMap, q_star: float) -> FixedPointKind:
    """|f′(q∞)| < 1 kontrahierend, > 1 expandierend."""
    slope = abs(map_derivative(qmap, q_star))
    if slope < 1.0 - NEUTRAL_BAND:
        return FixedPointKind.CONTRACTIVE
    if slope > 1.0 + NEUTRAL_BAND:
        return FixedPointKind.EXPANSIVE
    return FixedPointKind.NEUTRAL


__all__ = [
    "classify_fixed_point",
    "fixed_point",
    "iterate_quality_map",
    "map_derivative",
    "trajectory_frame",
]
