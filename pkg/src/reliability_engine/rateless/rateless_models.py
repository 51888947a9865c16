"""Datenmodelle des Fountain-Decoders."""

from enum import Enum
from typing import List

from pydantic import BaseModel, Field

from ..diversity.diversity_models import BranchResult


class StopReason(str, Enum):
    THRESHOLD = "threshold"
    MAX_SAMPLES = "max_samples"


class FountainState(BaseModel):
    """Gezogene Stichproben und die zuletzt berechnete Stopp-Konfidenz."""

    samples: List[BranchResult] = Field(default_factory=list)
    confidence: float = Field(default=0.0, ge=0, le=1)
    confidence_history: List[float] = Field(default_factory=list)
    stopped_reason: StopReason = Field(default=StopReason.MAX_SAMPLES)

    def record(self, confidence: float) -> None:
        self.confidence = confidence
        self.confidence_history.append(confidence)
