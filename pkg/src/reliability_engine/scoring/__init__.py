"""Checklisten-Scoring durch einen Judge-Kanal."""

from .score_models import Checklist, ChecklistSet, QualityScore, ScoreKind
from .scoring_engine import ScoringEngine, load_default_checklists

__all__ = [
    "Checklist",
    "ChecklistSet",
    "QualityScore",
    "ScoreKind",
    "ScoringEngine",
    "load_default_checklists",
]
