"""Datenmodelle der iterativen Decoder (HARQ-CC, HARQ-IR, Turbo)."""

from enum import Enum
from typing import List, Set

from pydantic import BaseModel, Field, validator

ALPHA_MIN = 0.1


class IssueType(str, Enum):
    FACTUAL_ERROR = "factual_error"
    MISSING_CONTENT = "missing_content"
    REASONING_GAP = "reasoning_gap"
    UNCLEAR = "unclear"


class Severity(str, Enum):
    """Schweregrad; critical ist am höchsten."""

    CRITICAL = "critical"
    MAJOR = "major"
    MINOR = "minor"

    @property
    def rank(self) -> int:
        return {"critical": 0, "major": 1, "minor": 2}[self.value]

    def at_least(self, floor: "Severity") -> bool:
        return self.rank <= floor.rank


class CritiqueIssue(BaseModel):
    """Ein Befund des Kritikers.

    Unstrukturierte Befunde (Parse-Fehler) tragen den Rohtext in ``fix`` und
    kein Zitat; sie führen zu einem vollständigen Rewrite statt einer
    Korrekturliste.
    """

    quote: str = Field(default="", description="Wörtliches Zitat aus der Antwort")
    issue_type: IssueType = Field(default=IssueType.UNCLEAR)
    fix: str = Field(default="", description="Geforderte Korrektur")
    severity: Severity = Field(default=Severity.MAJOR)
    structured: bool = Field(default=True)

    @validator("quote", always=True)
    def validate_quote(cls, v: str) -> str:
        return v.strip()

    @validator("structured", always=True)
    def validate_structured(cls, v: bool, values: dict) -> bool:
        if v and not values.get("quote"):
            raise ValueError("Strukturierte Befunde brauchen ein Zitat")
        return v

    @classmethod
    def unstructured(cls, raw: str) -> "CritiqueIssue":
        return cls(fix=raw.strip(), structured=False)


class IterationState(BaseModel):
    """Zustand eines iterativen Decoders: bester Kandidat, Historie, Dedup-Puffer."""

    best_text: str = Field(...)
    best_score: float = Field(..., ge=0, le=1)
    score_history: List[float] = Field(default_factory=list)
    accepted: List[bool] = Field(default_factory=list, description="Annahme je Historieneintrag")
    applied_corrections: Set[str] = Field(default_factory=set, description="Normalisierte Zitate")
    alpha: float = Field(default=1.0, ge=ALPHA_MIN, le=1)
    consecutive_regressions: int = Field(default=0, ge=0)

    @classmethod
    def start(cls, text: str, score: float, alpha: float = 1.0) -> "IterationState":
        return cls(best_text=text, best_score=score, score_history=[score], accepted=[True], alpha=alpha)

    def offer(self, text: str, score: float, quotes: List[str]) -> bool:
        """Annahme gdw. score >= best; nur dann wächst der Dedup-Puffer."""
        self.score_history.append(score)
        if score >= self.best_score:
            self.best_text, self.best_score = text, score
            self.applied_corrections.update(quotes)
            self.consecutive_regressions = 0
            self.accepted.append(True)
            return True
        self.consecutive_regressions += 1
        self.accepted.append(False)
        return False

    def plateaued(self, window: int = 2, spread: float = 0.015) -> bool:
        if len(self.score_history) < window:
            return False
        recent = self.score_history[-window:]
        return max(recent) - min(recent) < spread
