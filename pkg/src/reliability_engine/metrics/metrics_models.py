"""Datenmodelle der Auswertungsstatistik."""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field


class PairedSample(BaseModel):
    """Ein gepaarter Messwert; Paarung über (task_id, repeat_index)."""

    task_id: str = Field(...)
    technique_value: float = Field(...)
    baseline_value: float = Field(...)
    repeat_index: int = Field(default=0, ge=0)

    @property
    def difference(self) -> float:
        return self.technique_value - self.baseline_value


class CodingGain(BaseModel):
    """Coding Gain G, Effizienz η = G/ρ und Kosten-Overhead ρ."""

    gain: float = Field(..., description="Mittlere gepaarte Qualitätsdifferenz")
    efficiency: float = Field(..., description="G / ρ")
    rho: float = Field(..., gt=0, description="Mittlerer Kosten-Overhead je Aufgabe")


class CorrelationEstimate(BaseModel):
    """Pearson-r zweier Zweige mit Bootstrap-Intervall; undefiniert bei Nullvarianz."""

    r: Optional[float] = Field(default=None, ge=-1, le=1)
    ci_low: Optional[float] = Field(default=None)
    ci_high: Optional[float] = Field(default=None)
    n: int = Field(..., ge=0)
    defined: bool = Field(default=True)


class BootstrapInterval(BaseModel):
    mean: float = Field(...)
    lo: float = Field(...)
    hi: float = Field(...)
    level: float = Field(default=0.95, gt=0, lt=1)
    n_boot: int = Field(default=4000, ge=1)


class WilcoxonMethod(str, Enum):
    EXACT = "exact"
    NORMAL = "normal"
    DEGENERATE = "degenerate"


class WilcoxonResult(BaseModel):
    """Zweiseitiger Wilcoxon-Vorzeichen-Rang-Test.

    ``statistic`` ist min(W+, W−); bei lauter Null-Differenzen undefiniert (None).
    """

    statistic: Optional[float] = Field(default=None, ge=0)
    w_plus: Optional[float] = Field(default=None, ge=0)
    p_value: float = Field(..., ge=0, le=1)
    n_nonzero: int = Field(..., ge=0)
    method: WilcoxonMethod = Field(...)

    @property
    def degenerate(self) -> bool:
        return self.method == WilcoxonMethod.DEGENERATE


class GapDecomposition(BaseModel):
    """Additive Zerlegung der Lücke Orakel − realisierte Qualität."""

    info_gap: float = Field(..., description="Orakel − machbar")
    generalization_gap: float = Field(..., description="machbar − gelernt (CV)")
    policy_gap: float = Field(..., description="gelernt (CV) − simuliert")
    realization_gap: float = Field(..., description="simuliert − realisiert")

    @property
    def total(self) -> float:
        return self.info_gap + self.generalization_gap + self.policy_gap + self.realization_gap
