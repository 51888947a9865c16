"""Datenmodelle für ACM-Tabellen, Router-Cache und gelernte Router."""

import logging
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, validator

from ..channel.channel_models import AgentOutput
from ..core.run_models import TechniqueName

logger = logging.getLogger(__name__)


class ProfileKey(str, Enum):
    """Worauf die Bereiche einer MCS-Tabelle sich beziehen."""

    DIFFICULTY = "difficulty"
    CONFIDENCE = "confidence"


class McsProfile(BaseModel):
    """Eine MCS-Stufe: Bereich → Technik mit Parametern."""

    name: str = Field(..., description="Name der Stufe, z.B. MCS-0")
    difficulty_range: Tuple[float, float] = Field(..., description="Halboffenes Intervall [lo, hi)")
    technique: TechniqueName = Field(...)
    params: Dict[str, Any] = Field(default_factory=dict, description="Technik-Parameter")
    model_id: Optional[str] = Field(default=None, description="Bevorzugter Kanal im Pool")
    max_protection: bool = Field(default=False, description="Auffangprofil bei keinem Treffer")
    cost_multiplier: Optional[float] = Field(default=None, gt=0, description="Informativ")

    class Config:
        protected_namespaces = ()

    @validator("difficulty_range")
    def validate_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = v
        if not 0.0 <= lo < hi:
            raise ValueError(f"Ungültiger Bereich [{lo}, {hi})")
        return v

    def contains(self, value: float) -> bool:
        """[lo, hi); für hi >= 1 ist die obere Grenze eingeschlossen."""
        lo, hi = self.difficulty_range
        if hi >= 1.0:
            return lo <= value <= hi
        return lo <= value < hi


class McsTable(BaseModel):
    """Geordnete MCS-Stufen; der erste Treffer gewinnt."""

    name: str = Field(default="mcs")
    key: ProfileKey = Field(default=ProfileKey.DIFFICULTY)
    profiles: List[McsProfile] = Field(...)

    @validator("profiles")
    def validate_profiles(cls, v: List[McsProfile]) -> List[McsProfile]:
        if not v:
            raise ValueError("MCS-Tabelle braucht mindestens ein Profil")
        if not any(p.max_protection for p in v):
            # Letzte Stufe dient als Auffangprofil
            v[-1].max_protection = True
        return v

    @property
    def catch_all(self) -> McsProfile:
        return next(p for p in self.profiles if p.max_protection)


class TechniqueOutcome(BaseModel):
    """Mittelwerte einer Technik über die Wiederholungen einer Aufgabe."""

    quality: float = Field(..., ge=0, le=1)
    cost: float = Field(..., ge=0)


class CacheEntry(BaseModel):
    """Eine Zeile des Router-Caches."""

    task_id: str = Field(...)
    embedding: List[float] = Field(..., description="Embedding des Prompts")
    category: str = Field(default="other")
    per_technique: Dict[str, TechniqueOutcome] = Field(...)
    baseline_cost: float = Field(..., gt=0)
    difficulty: Optional[float] = Field(default=None, ge=0, le=1, description="Pilot-Schwierigkeit")
    prompt: Optional[str] = Field(default=None)

    @validator("embedding")
    def validate_embedding(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("Embedding darf nicht leer sein")
        return v

    @validator("per_technique")
    def validate_per_technique(cls, v: Dict[str, TechniqueOutcome]) -> Dict[str, TechniqueOutcome]:
        if not v:
            raise ValueError("per_technique darf nicht leer sein")
        return v

    def normalized_cost(self, technique: str) -> float:
        return self.per_technique[technique].cost / self.baseline_cost

    def best_technique(self) -> str:
        """Qualitäts-Argmax; Gleichstand → günstiger, dann Name."""
        return min(
            self.per_technique,
            key=lambda t: (-self.per_technique[t].quality, self.per_technique[t].cost, t),
        )


class RouterKind(str, Enum):
    LOGIT = "multinomial-logit"
    RIDGE = "ridge"


class RouterWeights(BaseModel):
    """Gewichte eines gelernten Routers (JSON-persistierbar)."""

    kind: RouterKind = Field(...)
    feature_spec: List[str] = Field(..., description="Merkmalsnamen in Spaltenreihenfolge")
    techniques: List[str] = Field(..., description="Klassen bzw. Ridge-Zielgrößen")
    coefficients: List[List[float]] = Field(..., description="Zeile je Technik")
    l2_penalty: float = Field(..., gt=0)
    categories: List[str] = Field(default_factory=list, description="Kategorien der One-Hot-Spalten")
    constant: bool = Field(default=False, description="Ein-Klassen-Router")
    training_accuracy: Optional[float] = Field(default=None, ge=0, le=1)
    training_mean_quality: Optional[float] = Field(default=None, ge=0, le=1)
    fold_metrics: Optional[List[float]] = Field(default=None)

    @validator("coefficients")
    def validate_shape(cls, v: List[List[float]], values: Dict) -> List[List[float]]:
        techniques = values.get("techniques") or []
        features = values.get("feature_spec") or []
        if len(v) != len(techniques):
            raise ValueError(f"{len(v)} Koeffizientenzeilen für {len(techniques)} Techniken")
        if any(len(row) != len(features) for row in v):
            raise ValueError("Koeffizientenzeilen passen nicht zur Merkmalsliste")
        return v


class PilotSource(str, Enum):
    LOGPROB = "logprob"
    SELF_RATING = "self-rating"
    FALLBACK = "fallback"


class PilotEstimate(BaseModel):
    """Ergebnis der Pilot-Schätzung."""

    difficulty: float = Field(..., ge=0, le=1)
    confidence: float = Field(..., ge=0, le=1, description="exp(mittlerer Logprob) bzw. 1 − d")
    source: PilotSource = Field(...)
    degraded: bool = Field(default=False)
    outputs: List[AgentOutput] = Field(default_factory=list, description="Pilot-Aufrufe (Overhead)")
