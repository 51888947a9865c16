"""Gemeinsame Datenmodelle: Aufgaben, Technik-Konfiguration und Lauf-Protokolle."""

import math
from enum import Enum
from typing import Any, Dict, List, Optional, Set, Union

from pydantic import BaseModel, Field, validator

from ..channel.channel_models import AgentOutput

RUN_FAILED = "run_failed"


class TaskCategory(str, Enum):
    """Aufgabenkategorien für Stratifizierung und Kategorie-Routing."""

    QA = "qa"
    REASONING = "reasoning"
    CREATIVE = "creative"
    CODE = "code"
    OTHER = "other"


class ObjectiveCheck(BaseModel):
    """Regex-geprüfte Faktenaussage mit Gewicht (objektiver Qualitätsanteil)."""

    pattern: str = Field(..., description="Regulärer Ausdruck (re.search, case-insensitive)")
    weight: float = Field(default=1.0, gt=0, description="Gewicht der Prüfung")


class Task(BaseModel):
    """Eine Aufgabe des Task-Sets."""

    id: str = Field(..., description="Eindeutige Task-ID")
    prompt: str = Field(..., description="Aufgabentext")
    category: TaskCategory = Field(default=TaskCategory.OTHER)
    difficulty_tier: Optional[str] = Field(default=None)
    reference: Optional[str] = Field(default=None, description="Referenzantwort")
    objective_checks: List[ObjectiveCheck] = Field(default_factory=list)

    @validator("prompt")
    def validate_prompt(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("Prompt darf nicht leer sein")
        return v

    @classmethod
    def coerce(cls, task: Union["Task", str]) -> "Task":
        if isinstance(task, Task):
            return task
        return cls(id="adhoc", prompt=task)


TaskLike = Union[Task, str]


class TechniqueName(str, Enum):
    """Alle ausführbaren Techniken."""

    BASELINE = "baseline"
    SC = "sc"
    EGC = "egc"
    MRC = "mrc"
    SOFT_MRC = "soft_mrc"
    SC_N = "sc_n"
    BEST_OF_N = "best_of_n"
    MRC_DISCRETE_N = "mrc_discrete_n"
    MRC_DISCRETE_N_SOFT = "mrc_discrete_n_soft"
    SELF_CONSISTENCY = "self_consistency"
    HARQ_CC = "harq_cc"
    HARQ_IR = "harq_ir"
    TURBO = "turbo"
    SELF_REFINE = "self_refine"
    FOUNTAIN = "fountain"
    SOFT_FOUNTAIN = "soft_fountain"
    FEC = "fec"
    CHAIN_OF_VERIFICATION = "chain_of_verification"
    ACM = "acm"
    SOFT_ACM = "soft_acm"


class TechniqueConfig(BaseModel):
    """Technikwahl plus alle Hyperparameter; None heißt Default der Technik."""

    technique: TechniqueName = Field(..., description="Operator")
    label: Optional[str] = Field(default=None, description="Name im Cache (Default: technique)")
    channels: List[str] = Field(default_factory=list, description="Kanalnamen, leer = alle")
    n: Optional[int] = Field(default=None, ge=1, description="Stichproben (SC-N, Discrete-N)")
    max_rounds: Optional[int] = Field(default=None, ge=1)
    max_iterations: Optional[int] = Field(default=None, ge=1)
    tau: Optional[float] = Field(default=None, ge=0, le=1)
    early_exit: Optional[bool] = Field(default=None)
    alpha0: Optional[float] = Field(default=None, ge=0.1, le=1)
    severity_floor: Optional[str] = Field(default=None)
    max_corrections: Optional[int] = Field(default=None, ge=1)
    n_max: Optional[int] = Field(default=None, ge=1)
    n_min: Optional[int] = Field(default=None, ge=1)
    gamma: Optional[float] = Field(default=None, ge=0, le=1)
    rate: Optional[float] = Field(default=None, gt=0, le=1)
    lam: Optional[float] = Field(default=None, ge=0, description="Lagrange-Knopf λ")
    profiles: Optional[str] = Field(default=None, description="Pfad zur MCS-Tabelle (ACM)")

    @property
    def name(self) -> str:
        return self.label or self.technique.value

    def overrides(self) -> Dict[str, Any]:
        """Gesetzte Hyperparameter als kwargs."""
        skip = {"technique", "label", "channels", "profiles"}
        return {k: v for k, v in self.dict().items() if k not in skip and v is not None}


class RunRecord(BaseModel):
    """Eine Ausführung einer Technik auf einer Aufgabe."""

    task_id: str = Field(...)
    technique: str = Field(..., description="Technik-Label")
    repeat_index: int = Field(default=0, ge=0)
    individual_outputs: List[AgentOutput] = Field(default_factory=list)
    overhead_outputs: List[AgentOutput] = Field(default_factory=list)
    judge_outputs: List[AgentOutput] = Field(default_factory=list)
    combined_text: str = Field(default="")
    final_quality: float = Field(..., ge=0, le=1)
    individual_scores: List[float] = Field(default_factory=list)
    rounds: int = Field(default=1, ge=0)
    total_cost: float = Field(default=0.0, ge=0)
    flags: Set[str] = Field(default_factory=set)
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @validator("total_cost", always=True)
    def compute_total_cost(cls, v: float, values: Dict) -> float:
        outputs = (
            values.get("individual_outputs", [])
            + values.get("overhead_outputs", [])
            + values.get("judge_outputs", [])
        )
        return math.fsum(o.cost_usd for o in outputs)

    @property
    def call_count(self) -> int:
        return len(self.individual_outputs) + len(self.overhead_outputs)

    @property
    def failed(self) -> bool:
        """Transportfehler statt Messung; zählt in keiner Auswertung."""
        return RUN_FAILED in self.flags

