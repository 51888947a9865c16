"""Datenmodelle für Agent-Kanäle."""

import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, validator

from ..theory.theory_models import QualityMap


class ChannelBackend(str, Enum):
    """Verfügbare Kanal-Backends."""

    HTTP = "http"
    SYNTHETIC = "synthetic"


class AgentOutput(BaseModel):
    """Eine Kanalbenutzung: eine vollständige Generierung."""

    text: str = Field(..., description="Antworttext ohne Thinking-Blöcke")
    model_id: str = Field(..., description="Modell-ID des Kanals")
    temperature: float = Field(..., ge=0, description="Verwendete Temperatur")
    prompt_tokens: int = Field(default=0, ge=0)
    completion_tokens: int = Field(default=0, ge=0, description="inkl. Thinking-Tokens")
    cost_usd: float = Field(default=0.0, ge=0, description="Kosten in USD")
    latency_s: float = Field(default=0.0, ge=0, description="Latenz in Sekunden")
    token_logprobs: Optional[List[float]] = Field(default=None, description="Logprobs je Token")
    mean_logprob: Optional[float] = Field(default=None, le=0)

    class Config:
        protected_namespaces = ()

    @validator("completion_tokens")
    def validate_completion_tokens(cls, v: int, values: Dict) -> int:
        if values.get("text") and v < 1:
            raise ValueError("Nicht-leerer Text braucht completion_tokens >= 1")
        return v

    @validator("token_logprobs")
    def validate_logprobs(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(lp > 0 for lp in v):
            raise ValueError("Logprobs müssen <= 0 sein")
        return v

    @validator("mean_logprob", always=True)
    def derive_mean_logprob(cls, v: Optional[float], values: Dict) -> Optional[float]:
        logprobs = values.get("token_logprobs")
        if not logprobs:
            return v
        mean = math.fsum(logprobs) / len(logprobs)
        if v is not None and abs(v - mean) > 1e-9:
            raise ValueError("mean_logprob stimmt nicht mit token_logprobs überein")
        return mean


class SyntheticChannelSpec(BaseModel):
    """Parameter des deterministischen Kanal-Simulators."""

    base_quality: float = Field(default=0.6, ge=0, le=1, description="Mittlere Qualität")
    quality_noise_sd: float = Field(default=0.1, ge=0, description="Rauschen der Qualität")
    branch_correlation: float = Field(
        default=0.0, ge=-1, le=1, description="Ladung auf den gemeinsamen Copula-Faktor"
    )
    refinement_map: QualityMap = Field(
        default_factory=QualityMap, description="Update-Abbildung für Verfeinerungs-Prompts"
    )
    cost_per_call: float = Field(default=0.001, gt=0, description="Kosten je Aufruf")
    seed: int = Field(default=0, description="Seed des Kanals")
    common_seed: int = Field(default=0, description="Seed des gemeinsamen Faktors")
    task_effect_sd: float = Field(
        default=0.0, ge=0, description="Aufgabenabhängiger Qualitätsversatz (kanalübergreifend)"
    )
    logprob_tokens: int = Field(default=8, ge=1, description="Anzahl synthetischer Tokens")


DEFAULT_THINKING_MARKERS: List[Tuple[str, str]] = [("<think>", "</think>")]


class ChannelConfig(BaseModel):
    """Konfiguration eines Kanals (HTTP-Endpunkt oder Simulator)."""

    name: str = Field(default="", description="Name im Kanal-Pool")
    backend: ChannelBackend = Field(default=ChannelBackend.HTTP)
    endpoint_url: Optional[str] = Field(default=None, description="Basis-URL (OpenAI-kompatibel)")
    model_id: str = Field(..., description="Modellname")
    default_temperature: float = Field(default=0.7, ge=0)
    price_per_input_token: float = Field(default=0.0, ge=0)
    price_per_output_token: float = Field(default=0.0, ge=0)
    supports_logprobs: bool = Field(default=False)
    api_key_env: Optional[str] = Field(default=None, description="Env-Variable mit Bearer-Token")
    max_tokens: Optional[int] = Field(default=None, ge=1, description="Token-Obergrenze je Aufruf")
    timeout_s: float = Field(default=120.0, gt=0)
    thinking_markers: List[Tuple[str, str]] = Field(
        default_factory=lambda: list(DEFAULT_THINKING_MARKERS),
        description="(open, close)-Paare von Thinking-Blöcken",
    )
    synthetic: Optional[SyntheticChannelSpec] = Field(default=None)

    class Config:
        protected_namespaces = ()

    @validator("endpoint_url", always=True)
    def validate_endpoint(cls, v: Optional[str], values: Dict) -> Optional[str]:
        if values.get("backend") == ChannelBackend.HTTP and not v:
            raise ValueError("HTTP-Backend benötigt endpoint_url")
        return v.rstrip("/") if v else v

    @validator("synthetic", always=True)
    def validate_synthetic(
        cls, v: Optional[SyntheticChannelSpec], values: Dict
    ) -> Optional[SyntheticChannelSpec]:
        if values.get("backend") == ChannelBackend.SYNTHETIC and v is None:
            return SyntheticChannelSpec()
        return v

    @property
    def label(self) -> str:
        return self.name or self.model_id
