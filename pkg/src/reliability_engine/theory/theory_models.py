"""Datenmodelle für die analytischen Ergebnisse (Kombinierer-Crossover, Verfeinerungsschwelle)."""

import math
from enum import Enum
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, Field, validator


class QualityMapKind(str, Enum):
    """Familien eindimensionaler Qualitäts-Update-Abbildungen auf [0, 1]."""

    IDENTITY = "identity"
    POWER = "power"
    LOGISTIC = "logistic"
    AFFINE = "affine"
    PIECEWISE_LINEAR = "piecewise_linear"


class FixedPointKind(str, Enum):
    """Stabilität eines Fixpunkts der Verfeinerungsabbildung."""

    CONTRACTIVE = "contractive"
    EXPANSIVE = "expansive"
    NEUTRAL = "neutral"


class QualityMap(BaseModel):
    """Qualitäts-Update-Abbildung f: [0,1] → [0,1] einer Verfeinerungsrunde.

    Parameter je Familie:
        power: ``exponent`` (f(q) = q^p)
        logistic: ``steepness``, ``midpoint``
        affine: ``slope``, ``intercept`` (Ergebnis wird auf [0,1] begrenzt)
        piecewise_linear: ``knots_x``/``knots_y``
    """

    kind: QualityMapKind = Field(default=QualityMapKind.IDENTITY, description="Familie")
    params: Dict[str, float] = Field(default_factory=dict, description="Parameter")
    knots_x: List[float] = Field(default_factory=list, description="Stützstellen (piecewise)")
    knots_y: List[float] = Field(default_factory=list, description="Werte (piecewise)")

    @validator("params")
    def validate_params(cls, v: Dict[str, float], values: Dict) -> Dict[str, float]:
        kind = values.get("kind")
        if kind == QualityMapKind.POWER and v.get("exponent", 1.0) <= 0:
            raise ValueError("exponent muss positiv sein")
        if kind == QualityMapKind.LOGISTIC and v.get("steepness", 1.0) <= 0:
            raise ValueError("steepness muss positiv sein")
        return v

    @validator("knots_y")
    def validate_knots(cls, v: List[float], values: Dict) -> List[float]:
        if values.get("kind") != QualityMapKind.PIECEWISE_LINEAR:
            return v
        xs = values.get("knots_x", [])
        if len(xs) < 2 or len(xs) != len(v):
            raise ValueError("piecewise_linear braucht >= 2 Stützstellen gleicher Länge")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("knots_x muss streng monoton steigen")
        if any(not 0.0 <= x <= 1.0 for x in list(xs) + list(v)):
            raise ValueError("Stützstellen müssen in [0,1] liegen")
        return v

    def __call__(self, q: float) -> float:
        q = min(1.0, max(0.0, float(q)))
        if self.kind == QualityMapKind.IDENTITY:
            value = q
        elif self.kind == QualityMapKind.POWER:
            value = q ** self.params.get("exponent", 1.0)
        elif self.kind == QualityMapKind.LOGISTIC:
            steepness = self.params.get("steepness", 10.0)
            midpoint = self.params.get("midpoint", 0.5)
            value = 1.0 / (1.0 + math.exp(-steepness * (q - midpoint)))
        elif self.kind == QualityMapKind.AFFINE:
            value = self.params.get("slope", 1.0) * q + self.params.get("intercept", 0.0)
        else:
            value = float(np.interp(q, self.knots_x, self.knots_y))
        return min(1.0, max(0.0, value))

    @classmethod
    def power(cls, exponent: float) -> "QualityMap":
        return cls(kind=QualityMapKind.POWER, params={"exponent": exponent})

    @classmethod
    def affine(cls, slope: float, intercept: float) -> "QualityMap":
        return cls(kind=QualityMapKind.AFFINE, params={"slope": slope, "intercept": intercept})


class AmplitudeProfile(BaseModel):
    """Lineares Gauß-Modell r_i = a_i s + n_i mit verrauschter Kanalschätzung."""

    amplitudes: List[float] = Field(..., description="Zweig-Amplituden a_i > 0")
    sigma: float = Field(default=1.0, gt=0, description="Kanalrauschen (Std.-Abw.)")
    sigma_w: float = Field(default=0.0, ge=0, description="CSI-Rauschen (Std.-Abw.)")

    @validator("amplitudes")
    def validate_amplitudes(cls, v: List[float]) -> List[float]:
        if len(v) < 2:
            raise ValueError("Mindestens zwei Zweige erforderlich")
        if any(a <= 0 for a in v):
            raise ValueError("Alle Amplituden müssen positiv sein")
        return v

    @property
    def d(self) -> int:
        return len(self.amplitudes)

    @property
    def s1(self) -> float:
        return float(sum(self.amplitudes))

    @property
    def s2(self) -> float:
        return float(sum(a * a for a in self.amplitudes))

    def with_csi_variance(self, sigma_w2: float) -> "AmplitudeProfile":
        """Kopie mit gesetzter CSI-Rauschvarianz σ_w²."""
        return AmplitudeProfile(
            amplitudes=list(self.amplitudes),
            sigma=self.sigma,
            sigma_w=math.sqrt(max(0.0, sigma_w2)),
        )


class CriticalCsiVariance(BaseModel):
    """Kritische CSI-Rauschvarianz σ_w*² samt Degenerations-Flag."""

    value: float = Field(..., ge=0, description="σ_w*²")
    degenerate: bool = Field(default=False, description="Alle Amplituden gleich")


class CrossoverSimulation(BaseModel):
    """Empirische Ausgangs-SNRs aus der Monte-Carlo-Simulation."""

    mrc_snr: float = Field(..., description="MRC mit verrauschten Gewichten")
    egc_snr: float = Field(..., description="EGC")
    mrc_se: float = Field(default=0.0, ge=0, description="Standardfehler MRC")
    egc_se: float = Field(default=0.0, ge=0, description="Standardfehler EGC")
    n_trials: int = Field(..., ge=1)


class IteratePoint(BaseModel):
    """Ein Schritt der Verfeinerungstrajektorie."""

    k: int = Field(..., ge=0)
    iterate: float = Field(..., ge=0, le=1)
    running_max: float = Field(..., ge=0, le=1)
    delivered: float = Field(..., ge=0, le=1, description="Ausgeliefert (Guard oder Iterat)")
