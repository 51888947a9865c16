"""Agent-Kanal: einheitliche Schnittstelle über HTTP- und Simulator-Backend."""

import logging
import math
import threading
from typing import Dict, Optional, Protocol, Union

from ..exceptions import CapabilityError, ConfigValidationError
from .channel_models import AgentOutput, ChannelBackend, ChannelConfig
from .http_backend import HttpBackend
from .synthetic_backend import SyntheticBackend

logger = logging.getLogger(__name__)


class Backend(Protocol):
    supports_parallel: bool

    def generate(self, prompt: str, temperature: float, want_logprobs: bool) -> AgentOutput:
        ...


class Channel:
    """Ein konfigurierter Kanal; von mehreren Threads gemeinsam nutzbar."""

    def __init__(self, config: ChannelConfig, backend: Optional[Backend] = None) -> None:
        self.config = config
        if backend is not None:
            self.backend = backend
        elif config.backend == ChannelBackend.SYNTHETIC:
            self.backend = SyntheticBackend(config)
        else:
            self.backend = HttpBackend(config)

    @property
    def name(self) -> str:
        return self.config.label

    @property
    def is_synthetic(self) -> bool:
        return isinstance(self.backend, SyntheticBackend)

    @property
    def supports_parallel(self) -> bool:
        return bool(getattr(self.backend, "supports_parallel", False))

    def generate(
        self,
        prompt: str,
        temperature: Optional[float] = None,
        want_logprobs: bool = False,
    ) -> AgentOutput:
        """Eine Kanalbenutzung.

        Args:
            prompt: Eingabe (nicht leer)
            temperature: Sampling-Temperatur, sonst der Default des Kanals
            want_logprobs: Token-Logprobs anfordern

        Returns:
            Vollständige AgentOutput mit Kosten und Latenz
        """
        if not prompt or not prompt.strip():
            raise ConfigValidationError("Prompt darf nicht leer sein")
        if temperature is None:
            temperature = self.config.default_temperature
        if temperature < 0:
            raise ConfigValidationError(f"Temperatur muss >= 0 sein, war {temperature}")
        if want_logprobs and not self.config.supports_logprobs:
            raise CapabilityError(f"Kanal {self.name} unterstützt keine Logprobs")

        output = self.backend.generate(prompt, temperature, want_logprobs)
        logger.debug(
            f"{self.name}: T={temperature:.2f}, {output.completion_tokens} Tokens, "
            f"{output.cost_usd:.6f} USD"
        )
        return output


ChannelLike = Union[Channel, ChannelConfig]

_registry: Dict[str, Channel] = {}
_registry_lock = threading.Lock()


def get_channel(config: ChannelLike) -> Channel:
    """Liefert den gemeinsam genutzten Kanal zu einer Konfiguration."""
    if isinstance(config, Channel):
        return config
    key = config.json()
    with _registry_lock:
        channel = _registry.get(key)
        if channel is None:
            channel = Channel(config)
            _registry[key] = channel
    return channel


def generate(
    config: ChannelLike,
    prompt: str,
    temperature: Optional[float] = None,
    want_logprobs: bool = False,
) -> AgentOutput:
    """Funktionale Variante von :meth:`Channel.generate`."""
    return get_channel(config).generate(prompt, temperature, want_logprobs)


def intrinsic_confidence(output: AgentOutput) -> float:
    """Geometrisches Mittel der Token-Wahrscheinlichkeiten, exp(mittlerer Logprob)."""
    if not output.token_logprobs:
        raise CapabilityError(f"Ausgabe von {output.model_id} enthält keine Logprobs")
    mean = math.fsum(output.token_logprobs) / len(output.token_logprobs)
    return math.exp(min(0.0, mean))
