"""Datenmodelle der strukturierten Vorwärtsfehlerkorrektur."""

from enum import Enum
from typing import Dict, List

from pydantic import BaseModel, Field

from ..channel.channel_models import AgentOutput


class ParityKind(str, Enum):
    """Paritätsabschnitte in Plan-Reihenfolge."""

    REASONING = "reasoning"
    VERIFICATION = "verification"
    ALTERNATIVE = "alternative"
    CONFIDENCE = "confidence"


# Coderate → Paritätsplan; niedrigere Rate ⊇ höhere Rate
CODE_RATES: Dict[float, List[ParityKind]] = {
    1.0: [],
    0.75: [ParityKind.REASONING],
    0.50: [ParityKind.REASONING, ParityKind.VERIFICATION],
    0.33: [ParityKind.REASONING, ParityKind.VERIFICATION, ParityKind.ALTERNATIVE],
    0.25: list(ParityKind),
}


class ParitySection(BaseModel):
    kind: ParityKind = Field(...)
    text: str = Field(...)
    output: AgentOutput = Field(...)
