"""Gemeinsame Fixtures: skriptbarer Fake-Kanal, synthetische Kanäle, Cache-Verzeichnisse."""

import logging
import math
from typing import Callable, List, Optional, Sequence, Union

import pytest

from reliability_engine.channel.channel import Channel
from reliability_engine.channel.channel_models import (
    AgentOutput,
    ChannelBackend,
    ChannelConfig,
    SyntheticChannelSpec,
)
from reliability_engine.core.context import EngineConfig, TechniqueContext
from reliability_engine.exceptions import ChannelTransportError

Responder = Union[Sequence[str], Callable[[str], str]]


class ScriptedBackend:
    """Fake-Backend: Antworten aus einer Liste (zyklisch) oder einer Funktion des Prompts.

    Texte mit ``Q=0.xxxx`` werden vom synthetischen Judge als Qualität gelesen.
    """

    supports_parallel = False

    def __init__(
        self,
        model_id: str,
        responder: Responder,
        cost: float = 0.001,
        confidence: Optional[float] = None,
        fail: bool = False,
    ) -> None:
        self.model_id = model_id
        self.responder = responder
        self.cost = cost
        self.confidence = confidence
        self.fail = fail
        self.prompts: List[str] = []
        self.temperatures: List[float] = []

    def _text(self, prompt: str) -> str:
        if callable(self.responder):
            return self.responder(prompt)
        return self.responder[(len(self.prompts) - 1) % len(self.responder)]

    def generate(self, prompt: str, temperature: float, want_logprobs: bool) -> AgentOutput:
        self.prompts.append(prompt)
        self.temperatures.append(temperature)
        if self.fail:
            raise ChannelTransportError(f"{self.model_id} nicht erreichbar", status_code=503, attempts=4)
        logprobs = None
        if want_logprobs:
            logprobs = [math.log(self.confidence if self.confidence is not None else 0.5)] * 4
        return AgentOutput(
            text=self._text(prompt),
            model_id=self.model_id,
            temperature=temperature,
            prompt_tokens=len(prompt.split()),
            completion_tokens=4,
            cost_usd=self.cost,
            token_logprobs=logprobs,
        )

    @property
    def calls(self) -> int:
        return len(self.prompts)


@pytest.fixture
def scripted_channel() -> Callable[..., Channel]:
    """Fabrik für Kanäle mit ScriptedBackend."""

    def make(
        name: str,
        responder: Responder,
        cost: float = 0.001,
        confidence: Optional[float] = None,
        fail: bool = False,
    ) -> Channel:
        config = ChannelConfig(
            name=name,
            backend=ChannelBackend.SYNTHETIC,
            model_id=name,
            supports_logprobs=confidence is not None,
        )
        return Channel(config, backend=ScriptedBackend(name, responder, cost, confidence, fail))

    return make


@pytest.fixture
def synthetic_channel() -> Callable[..., Channel]:
    """Fabrik für Kanäle mit dem deterministischen Simulator."""

    def make(name: str, supports_logprobs: bool = False, **spec) -> Channel:
        return Channel(
            ChannelConfig(
                name=name,
                backend=ChannelBackend.SYNTHETIC,
                model_id=name,
                supports_logprobs=supports_logprobs,
                synthetic=SyntheticChannelSpec(**spec),
            )
        )

    return make


@pytest.fixture
def judge(synthetic_channel) -> Channel:
    """Synthetischer Judge: liest den Qualitätsmarker des Kandidaten."""
    return synthetic_channel("judge", cost_per_call=0.0001)


@pytest.fixture
def context(judge) -> TechniqueContext:
    return TechniqueContext(judge, config=EngineConfig(max_workers=2))


@pytest.fixture
def cache_dir(tmp_path):
    path = tmp_path / "cache"
    path.mkdir()
    return path


@pytest.fixture
def restore_root_logger():
    """setup_logging ersetzt die Root-Handler; danach wird der vorige Zustand hergestellt."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)
