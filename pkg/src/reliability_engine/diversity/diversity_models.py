"""Datenmodelle für Diversitäts-Kombinierer."""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, validator

from ..channel.channel_models import AgentOutput
from ..scoring.score_models import QualityScore


class BranchResult(BaseModel):
    """Ein Zweig: Ausgabe, Bewertung und Herkunftskanal."""

    output: AgentOutput = Field(...)
    score: Optional[QualityScore] = Field(default=None, description="Judge-Bewertung")
    confidence: Optional[float] = Field(default=None, gt=0, le=1, description="Intrinsische Konfidenz")
    channel_index: int = Field(..., ge=0)
    sample_index: int = Field(default=0, ge=0, description="Position in der Stichprobe")

    @property
    def text(self) -> str:
        return self.output.text

    @property
    def quality(self) -> float:
        return self.score.value if self.score is not None else 0.0


class ClusterSource(str, Enum):
    VOTER = "voter"
    SINGLETON_FALLBACK = "singleton-fallback"


class ClusterAssignment(BaseModel):
    """Cluster-IDs je Stichprobe."""

    labels: List[str] = Field(...)
    source: ClusterSource = Field(default=ClusterSource.VOTER)

    @validator("labels")
    def validate_labels(cls, v: List[str]) -> List[str]:
        if not v:
            raise ValueError("Mindestens ein Label erforderlich")
        return v

    @classmethod
    def singletons(cls, n: int) -> "ClusterAssignment":
        return cls(labels=[str(i) for i in range(n)], source=ClusterSource.SINGLETON_FALLBACK)


class CombiningMode(str, Enum):
    """Gewichtsquelle der diskreten Kombinierer."""

    JUDGE = "judge"
    UNIFORM = "uniform"
    CONFIDENCE = "confidence"
