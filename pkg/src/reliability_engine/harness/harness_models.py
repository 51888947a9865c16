"""Datenmodelle des Evaluations-Harness: Experiment-Konfiguration, Folds, Policy-Tabelle."""

import logging
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, validator

from ..channel.channel_models import ChannelConfig
from ..core.run_models import Task, TechniqueConfig, TechniqueName

logger = logging.getLogger(__name__)

ROLE_NAMES = ("synthesizer", "critic", "voter", "decoder", "pilot")
DEFAULT_LAMBDAS = [0.0, 0.005, 0.01, 0.02, 0.05, 0.1]


class EmbeddingKind(str, Enum):
    HASH = "hash"
    HTTP = "http"


class EmbeddingConfig(BaseModel):
    """Embedding-Quelle des Router-Caches."""

    kind: EmbeddingKind = Field(default=EmbeddingKind.HASH)
    dimension: int = Field(default=256, ge=2)
    endpoint_url: Optional[str] = Field(default=None)
    model_id: Optional[str] = Field(default=None)
    api_key_env: Optional[str] = Field(default=None)

    class Config:
        protected_namespaces = ()

    @validator("endpoint_url", always=True)
    def validate_endpoint(cls, v: Optional[str], values: Dict) -> Optional[str]:
        if values.get("kind") == EmbeddingKind.HTTP and not v:
            raise ValueError("HTTP-Embeddings brauchen endpoint_url")
        return v


class ExperimentConfig(BaseModel):
    """Ein Experiment: Kanäle, Judge, Techniken, Aufgaben, Wiederholungen, Seed."""

    name: str = Field(default="experiment")
    channels: List[ChannelConfig] = Field(..., description="Alle Kanäle, Namen eindeutig")
    judge: str = Field(..., description="Name des Judge-Kanals")
    pool: List[str] = Field(default_factory=list, description="Generator-Pool, leer = alle außer Judge")
    roles: Dict[str, str] = Field(default_factory=dict, description="Rolle → Kanalname")
    techniques: List[TechniqueConfig] = Field(..., description="Techniken mit Overrides")
    tasks_file: Optional[str] = Field(default=None)
    tasks: List[Task] = Field(default_factory=list, description="Inline-Aufgaben")
    repeats: int = Field(default=1, ge=1)
    seed: int = Field(default=0)
    cache_dir: str = Field(default="cache")
    checklists_file: Optional[str] = Field(default=None)
    prompts_file: Optional[str] = Field(default=None)
    mcs_table: Optional[str] = Field(default=None, description="MCS-Tabelle für ACM und ACM-Simulation")
    lambdas: List[float] = Field(default_factory=lambda: list(DEFAULT_LAMBDAS))
    k: int = Field(default=20, ge=1)
    n_folds: int = Field(default=5, ge=2)
    l2: float = Field(default=1.0, gt=0)
    n_boot: int = Field(default=4000, ge=100)
    max_concurrency: int = Field(default=4, ge=1, description="Parallel bearbeitete Aufgaben")
    max_workers: int = Field(default=8, ge=1, description="Fan-out-Threads je Technik")
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)

    @validator("channels")
    def validate_channels(cls, v: List[ChannelConfig]) -> List[ChannelConfig]:
        if not v:
            raise ValueError("Mindestens ein Kanal erforderlich")
        names = [c.label for c in v]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"Doppelte Kanalnamen: {duplicates}")
        return v

    @validator("judge")
    def validate_judge(cls, v: str, values: Dict) -> str:
        names = {c.label for c in values.get("channels") or []}
        if names and v not in names:
            raise ValueError(f"Judge-Kanal {v} nicht definiert")
        return v

    @validator("roles")
    def validate_roles(cls, v: Dict[str, str], values: Dict) -> Dict[str, str]:
        names = {c.label for c in values.get("channels") or []}
        for role, channel in v.items():
            if role not in ROLE_NAMES:
                raise ValueError(f"Unbekannte Rolle {role}")
            if names and channel not in names:
                raise ValueError(f"Rolle {role}: Kanal {channel} nicht definiert")
        return v

    @validator("techniques")
    def validate_techniques(cls, v: List[TechniqueConfig]) -> List[TechniqueConfig]:
        labels = [t.name for t in v]
        if len(set(labels)) != len(labels):
            raise ValueError("Technik-Labels müssen eindeutig sein")
        if TechniqueName.BASELINE.value not in labels:
            logger.info("Baseline fehlt in der Technikliste, wird ergänzt")
            v = [TechniqueConfig(technique=TechniqueName.BASELINE)] + list(v)
        return v

    @validator("lambdas")
    def validate_lambdas(cls, v: List[float]) -> List[float]:
        if any(lam < 0 for lam in v):
            raise ValueError("λ muss >= 0 sein")
        return v

    def pool_names(self) -> List[str]:
        if self.pool:
            return list(self.pool)
        names = [c.label for c in self.channels if c.label != self.judge]
        return names or [self.judge]


class FoldPlan(BaseModel):
    """Aufgabe → Fold; alle Wiederholungen einer Aufgabe liegen im selben Fold."""

    n_folds: int = Field(default=5, ge=2)
    assignment: Dict[str, int] = Field(default_factory=dict)
    stratified_by: str = Field(default="category")

    @validator("assignment")
    def validate_assignment(cls, v: Dict[str, int], values: Dict) -> Dict[str, int]:
        n_folds = values.get("n_folds", 5)
        if any(not 0 <= f < n_folds for f in v.values()):
            raise ValueError("Fold-Index außerhalb des Bereichs")
        return v

    def test_ids(self, fold: int) -> List[str]:
        return sorted(t for t, f in self.assignment.items() if f == fold)

    def train_ids(self, fold: int) -> List[str]:
        return sorted(t for t, f in self.assignment.items() if f != fold)


class PolicyRow(BaseModel):
    """Eine Zeile der Policy-Tabelle."""

    policy: str = Field(...)
    mean_quality: float = Field(...)
    ci_low: float = Field(...)
    ci_high: float = Field(...)
    mean_cost: float = Field(..., ge=0, description="Kosten je Aufgabe in USD")
    quality_per_dollar: Optional[float] = Field(default=None)
    rho: float = Field(..., ge=0, description="Mittlerer Kosten-Overhead")
    gain: float = Field(..., description="G gegenüber Baseline")
    delta_q: Optional[float] = Field(default=None, description="Δq gegenüber Fixed-Best (CV)")
    wilcoxon_p: Optional[float] = Field(default=None, ge=0, le=1)
    cohen_dz: Optional[float] = Field(default=None)
    win_rate: Optional[float] = Field(default=None, ge=0, le=1)
    n_tasks: int = Field(..., ge=1)
    out_of_fold: bool = Field(default=False)
    on_frontier: bool = Field(default=False)
