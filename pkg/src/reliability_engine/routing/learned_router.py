"""Gelernte Router als Vergleich zum semKNN-Router: multinomiales Logit und Ridge."""

import json
import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from ..exceptions import ConfigValidationError
from .features import base_features, extract_prompt_features, feature_matrix
from .routing_models import CacheEntry, RouterKind, RouterWeights

logger = logging.getLogger(__name__)

LOGIT_GTOL = 1e-6
LOGIT_MAXITER = 500


def _categories(entries: Sequence[CacheEntry], categories: Optional[Sequence[str]]) -> List[str]:
    return list(categories) if categories is not None else sorted({e.category for e in entries})


def _rows(entries: Sequence[CacheEntry]) -> List[Tuple[float, str, Optional[str]]]:
    rows = []
    for e in entries:
        if e.difficulty is None:
            raise ConfigValidationError(f"Cache-Eintrag {e.task_id} hat keine Pilot-Schwierigkeit")
        rows.append((e.difficulty, e.category, e.prompt))
    return rows


def _logit_objective(
    w: np.ndarray, x: np.ndarray, y: np.ndarray, n_classes: int, l2: float, penalty: np.ndarray
) -> Tuple[float, np.ndarray]:
    n = x.shape[0]
    weights = w.reshape(n_classes, x.shape[1])
    logits = x @ weights.T
    logits -= logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(logits).sum(axis=1))
    nll = float(np.sum(log_norm - logits[np.arange(n), y])) / n
    probs = np.exp(logits - log_norm[:, None])
    probs[np.arange(n), y] -= 1.0
    grad = probs.T @ x / n + l2 * weights * penalty / n
    loss = nll + 0.5 * l2 * float(np.sum((weights * penalty) ** 2)) / n
    return loss, grad.ravel()


def fit_logit_router(
    entries: Sequence[CacheEntry],
    l2: float = 1.0,
    categories: Optional[Sequence[str]] = None,
    labels: Optional[Sequence[str]] = None,
) -> RouterWeights:
    """L2-regularisiertes multinomiales Logit auf [1, d, One-Hot(Kategorie)].

    Zielklasse ist je Aufgabe die Argmax-Technik (oder ``labels``). Der
    Achsenabschnitt bleibt unbestraft; Start bei Null macht den Fit
    deterministisch.
    """
    if l2 <= 0:
        raise ConfigValidationError("l2 muss > 0 sein")
    if not entries:
        raise ConfigValidationError("Keine Trainingsdaten")
    cats = _categories(entries, categories)
    names, x = feature_matrix(_rows(entries), cats)
    targets = list(labels) if labels is not None else [e.best_technique() for e in entries]
    if len(targets) != len(entries):
        raise ConfigValidationError("labels passt nicht zur Anzahl der Einträge")
    classes = sorted(set(targets))

    if len(classes) == 1:
        logger.warning(f"Logit-Router: nur Klasse {classes[0]}, konstanter Router")
        weights = RouterWeights(
            kind=RouterKind.LOGIT,
            feature_spec=names,
            techniques=classes,
            coefficients=[[0.0] * len(names)],
            l2_penalty=l2,
            categories=cats,
            constant=True,
        )
    else:
        y = np.asarray([classes.index(t) for t in targets])
        penalty = np.ones((len(classes), len(names)))
        penalty[:, 0] = 0.0
        result = optimize.minimize(
            _logit_objective,
            np.zeros(len(classes) * len(names)),
            args=(x, y, len(classes), l2, penalty),
            jac=True,
            method="L-BFGS-B",
            options={"gtol": LOGIT_GTOL, "maxiter": LOGIT_MAXITER},
        )
        if not result.success:
            logger.warning(f"Logit-Router: Optimierer meldet {result.message}")
        weights = RouterWeights(
            kind=RouterKind.LOGIT,
            feature_spec=names,
            techniques=classes,
            coefficients=result.x.reshape(len(classes), len(names)).tolist(),
            l2_penalty=l2,
            categories=cats,
        )
    return _with_training_metrics(weights, entries, targets)


def fit_ridge_router(
    entries: Sequence[CacheEntry],
    l2: float = 1.0,
    extended: bool = True,
    categories: Optional[Sequence[str]] = None,
) -> RouterWeights:
    """Ridge-Regression der Qualität je Technik in geschlossener Form.

    w = (XᵀX + l2·P)⁻¹ Xᵀy mit P = diag(0, 1, …, 1).
    """
    if l2 <= 0:
        raise ConfigValidationError("Ridge braucht l2 > 0")
    if not entries:
        raise ConfigValidationError("Keine Trainingsdaten")
    cats = _categories(entries, categories)
    techniques = sorted({t for e in entries for t in e.per_technique})
    coefficients = []
    names: List[str] = []
    for technique in techniques:
        subset = [e for e in entries if technique in e.per_technique]
        if len(subset) < 2:
            raise ConfigValidationError(f"Ridge: {technique} hat weniger als 2 Einträge")
        names, x = feature_matrix(_rows(subset), cats, extended=extended)
        y = np.asarray([e.per_technique[technique].quality for e in subset])
        penalty = np.eye(len(names))
        penalty[0, 0] = 0.0
        w = np.linalg.solve(x.T @ x + l2 * penalty, x.T @ y)
        coefficients.append(w.tolist())
    weights = RouterWeights(
        kind=RouterKind.RIDGE,
        feature_spec=names,
        techniques=techniques,
        coefficients=coefficients,
        l2_penalty=l2,
        categories=cats,
    )
    return _with_training_metrics(weights, entries, [e.best_technique() for e in entries])


def _features_for(weights: RouterWeights, difficulty: float, category: str, prompt: Optional[str]) -> np.ndarray:
    row = base_features(difficulty, category, weights.categories)
    if len(weights.feature_spec) > len(row):
        row += extract_prompt_features(prompt or "")
    return np.asarray(row, dtype=float)


def predict_scores(
    weights: RouterWeights, difficulty: float, category: str, prompt: Optional[str] = None
) -> np.ndarray:
    """Logits (Logit) bzw. vorhergesagte Qualitäten (Ridge) je Technik."""
    return np.asarray(weights.coefficients) @ _features_for(weights, difficulty, category, prompt)


def predict(
    weights: RouterWeights,
    difficulty: float,
    category: str,
    prompt: Optional[str] = None,
    allowed: Optional[Sequence[str]] = None,
) -> str:
    """Technik mit höchstem Score; ``allowed`` beschränkt auf verfügbare Techniken."""
    scores = predict_scores(weights, difficulty, category, prompt)
    candidates = [
        i for i, t in enumerate(weights.techniques) if allowed is None or t in allowed
    ]
    if not candidates:
        raise ConfigValidationError("Keine der Router-Techniken ist verfügbar")
    return weights.techniques[max(candidates, key=lambda i: (scores[i], -i))]


def predict_entry(weights: RouterWeights, entry: CacheEntry) -> str:
    if entry.difficulty is None:
        raise ConfigValidationError(f"Cache-Eintrag {entry.task_id} hat keine Pilot-Schwierigkeit")
    return predict(weights, entry.difficulty, entry.category, entry.prompt, list(entry.per_technique))


def _with_training_metrics(
    weights: RouterWeights, entries: Sequence[CacheEntry], targets: Sequence[str]
) -> RouterWeights:
    picks = [predict_entry(weights, e) for e in entries]
    weights.training_accuracy = sum(p == t for p, t in zip(picks, targets)) / len(entries)
    weights.training_mean_quality = math.fsum(
        e.per_technique[p].quality for e, p in zip(entries, picks)
    ) / len(entries)
    logger.info(
        f"{weights.kind.value}-Router: Trainingsgenauigkeit {weights.training_accuracy:.3f}, "
        f"q̄ {weights.training_mean_quality:.4f}"
    )
    return weights


def save_router(weights: RouterWeights, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(weights.dict(), indent=2, default=str), encoding="utf-8")


def load_router(path: Union[str, Path]) -> RouterWeights:
    try:
        return RouterWeights.parse_obj(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, ValueError) as e:
        raise ConfigValidationError(f"Router-Gewichte {path} nicht lesbar: {e}") from e


__all__ = [
    "fit_logit_router",
    "fit_ridge_router",
    "load_router",
    "predict",
    "predict_entry",
    "predict_scores",
    "save_router",
]
