"""Experiment-Harness. Runner und Auswertung liegen in eigenen Modulen."""

from .harness_models import ExperimentConfig, FoldPlan, PolicyRow
from .run_cache import RunCache

__all__ = ["ExperimentConfig", "FoldPlan", "PolicyRow", "RunCache"]
