"""Datenmodelle für das Scoring-System."""

import math
from enum import Enum
from typing import Dict, List

from pydantic import BaseModel, Field, validator

from ..channel.channel_models import AgentOutput

CHECKLIST_SIZE = 15


class ScoreKind(str, Enum):
    """Herkunft eines Qualitätswerts."""

    CHECKLIST = "checklist"
    BLENDED = "blended"
    DIFFERENTIAL = "differential"
    SYNTHETIC_ORACLE = "synthetic-oracle"


class ChecklistVariant(str, Enum):
    WITH_REFERENCE = "with_reference"
    WITHOUT_REFERENCE = "without_reference"


class ChecklistCriterion(BaseModel):
    """Ein gewichtetes Ja/Nein-Kriterium des Judges."""

    id: str = Field(..., description="Eindeutige Kriteriums-ID")
    question: str = Field(..., description="Ja/Nein-Frage")
    weight: float = Field(..., gt=0, description="Gewicht")


class Checklist(BaseModel):
    """Eine Checklisten-Variante mit genau 15 Kriterien."""

    variant: ChecklistVariant = Field(...)
    criteria: List[ChecklistCriterion] = Field(...)

    @validator("criteria")
    def validate_criteria(cls, v: List[ChecklistCriterion]) -> List[ChecklistCriterion]:
        if len(v) != CHECKLIST_SIZE:
            raise ValueError(f"Checkliste braucht {CHECKLIST_SIZE} Kriterien, hat {len(v)}")
        if abs(math.fsum(c.weight for c in v) - 1.0) > 1e-9:
            raise ValueError("Gewichte müssen sich zu 1 summieren")
        if len({c.id.lower() for c in v}) != len(v):
            raise ValueError("Kriteriums-IDs müssen eindeutig sein")
        return v


class ChecklistSet(BaseModel):
    """Beide Varianten (mit und ohne Referenz)."""

    with_reference: Checklist
    without_reference: Checklist

    def for_reference(self, has_reference: bool) -> Checklist:
        return self.with_reference if has_reference else self.without_reference


class QualityScore(BaseModel):
    """Qualitätswert in [0,1] mit Herkunft."""

    value: float = Field(..., description="Qualität, auf [0,1] begrenzt")
    kind: ScoreKind = Field(default=ScoreKind.CHECKLIST)
    components: Dict[str, float] = Field(
        default_factory=dict,
        description="blended: objective/judge; differential: candidate/baseline",
    )
    answers: Dict[str, bool] = Field(default_factory=dict, description="Antworten je Kriterium")
    degraded: bool = Field(default=False, description="Unbeantwortete Kriterien als 'nein' gewertet")
    judge_outputs: List[AgentOutput] = Field(default_factory=list)

    @validator("value")
    def clamp_value(cls, v: float) -> float:
        return min(1.0, max(0.0, float(v)))

    @validator("components")
    def validate_components(cls, v: Dict[str, float], values: Dict) -> Dict[str, float]:
        if values.get("kind") == ScoreKind.BLENDED and not {"objective", "judge"} <= set(v):
            raise ValueError("blended braucht objective- und judge-Komponente")
        return v

    @property
    def judge_cost(self) -> float:
        return math.fsum(o.cost_usd for o in self.judge_outputs)
