"""Ausnahmen der Reliability Engine."""

from typing import List, Optional


class ReliabilityError(Exception):
    """Basisklasse aller Fehler dieses Pakets."""


class ConfigValidationError(ReliabilityError):
    """Ungültige Konfiguration, ungültiger Parameter oder leere Eingabe."""


class CapabilityError(ReliabilityError):
    """Eine angeforderte Fähigkeit (z.B. Logprobs) wird vom Kanal nicht unterstützt."""


class ChannelTransportError(ReliabilityError):
    """Kanal nicht erreichbar oder Anfrage endgültig abgelehnt."""

    def __init__(
        self,
        message: str,
        status_code: Optional[int] = None,
        attempts: int = 1,
    ) -> None:
        super().__init__(message)
        self.status_code = status_code
        self.attempts = attempts


class AllBranchesFailedError(ChannelTransportError):
    """Alle Zweige eines Fan-outs sind fehlgeschlagen."""

    def __init__(self, message: str, causes: Optional[List[Exception]] = None) -> None:
        super().__init__(message)
        self.causes = list(causes or [])
