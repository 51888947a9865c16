"""Deterministischer Kanal-Simulator.

Jede Ausgabe ist ein kurzer kanonischer Text mit eingebetteter Qualität
(``Q=0.7312``), den der synthetische Judge ohne LLM zurücklesen kann.

Ziehungen hängen nur von (Seed, Draw-Scope, Prompt, Aufrufindex je Prompt) ab.
Zwei Kanäle, die denselben Prompt mit demselben Index sehen, teilen sich den
Copula-Faktor; die paarweise Korrelation ist sign(ρa)·sign(ρb)·sqrt(|ρa·ρb|).
"""

import contextlib
import contextvars
import hashlib
import logging
import math
import re
import threading
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .channel_models import AgentOutput, ChannelConfig, SyntheticChannelSpec

logger = logging.getLogger(__name__)

QUALITY_MARKER = re.compile(r"Q=(\d+(?:\.\d+)?)")
_TASK_STREAM = 0x7A5C
_COMMON_STREAM = 0xC0C0

_draw_scope: contextvars.ContextVar[str] = contextvars.ContextVar("draw_scope", default="")


@contextlib.contextmanager
def draw_scope(key: str) -> Iterator[None]:
    """Setzt den Draw-Scope für alle synthetischen Aufrufe im Block."""
    token = _draw_scope.set(key)
    try:
        yield
    finally:
        _draw_scope.reset(token)


def current_draw_scope() -> str:
    """Aktiver Draw-Scope, leer außerhalb eines Laufs."""
    return _draw_scope.get()


def read_quality_markers(text: str) -> List[float]:
    """Liest alle eingebetteten Qualitätsmarker aus einem Text."""
    return [min(1.0, max(0.0, float(m))) for m in QUALITY_MARKER.findall(text)]


def read_quality_marker(text: str) -> Optional[float]:
    """Erster Qualitätsmarker im Text oder None."""
    markers = read_quality_markers(text)
    return markers[0] if markers else None


def format_quality(q: float) -> str:
    return f"Q={q:.4f}"


def _digest(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


class SyntheticBackend:
    """Simulator mit Gauß-Copula über das latente Qualitätsrauschen."""

    # Sequentielle Ausführung hält die Aufrufindizes deterministisch
    supports_parallel = False

    def __init__(self, config: ChannelConfig) -> None:
        self.config = config
        self.spec: SyntheticChannelSpec = config.synthetic or SyntheticChannelSpec()
        self._channel_key = _digest(config.label)
        self._counters: Dict[Tuple[str, int], int] = {}
        self._lock = threading.Lock()

    def _next_index(self, scope: str, prompt_key: int) -> int:
        with self._lock:
            index = self._counters.get((scope, prompt_key), 0)
            self._counters[(scope, prompt_key)] = index + 1
        return index

    def latent_noise(self, prompt: str, call_index: int, scope: str = "") -> float:
        """Standardnormales Rauschen mit Ladung auf den gemeinsamen Faktor."""
        prompt_key, scope_key = _digest(prompt), _digest(scope)
        own = np.random.default_rng(
            [self.spec.seed % 2**32, self._channel_key, scope_key, prompt_key, call_index]
        ).standard_normal()
        rho = self.spec.branch_correlation
        if rho == 0.0:
            return float(own)
        common = np.random.default_rng(
            [self.spec.common_seed % 2**32, _COMMON_STREAM, scope_key, prompt_key, call_index]
        ).standard_normal()
        loading = math.copysign(math.sqrt(abs(rho)), rho)
        return float(loading * common + math.sqrt(1.0 - abs(rho)) * own)

    def task_effect(self, prompt: str) -> float:
        if self.spec.task_effect_sd == 0.0:
            return 0.0
        z = np.random.default_rng(
            [self.spec.common_seed % 2**32, _TASK_STREAM, _digest(prompt)]
        ).standard_normal()
        return float(self.spec.task_effect_sd * z)

    def draw_quality(self, prompt: str, call_index: int, scope: str = "") -> float:
        """Qualität einer Ziehung, auf [0, 1] begrenzt."""
        noise = self.spec.quality_noise_sd * self.latent_noise(prompt, call_index, scope)
        embedded = read_quality_markers(prompt)
        if embedded:
            # Verfeinerungs-/Synthese-Prompt: Update-Abbildung auf den besten Kontext
            value = self.spec.refinement_map(max(embedded)) + noise
        else:
            value = self.spec.base_quality + self.task_effect(prompt) + noise
        return round(min(1.0, max(0.0, value)), 4)

    def draw(
        self,
        prompt: str,
        call_index: int,
        temperature: float,
        want_logprobs: bool,
        scope: str = "",
    ) -> AgentOutput:
        """Reine Funktion von (Spec, Seed, Scope, Prompt, Aufrufindex)."""
        quality = self.draw_quality(prompt, call_index, scope)
        n_tokens = self.spec.logprob_tokens
        token_logprobs = None
        if want_logprobs:
            token_logprobs = [math.log(max(quality, 1e-6))] * n_tokens
        return AgentOutput(
            text=format_quality(quality),
            model_id=self.config.model_id,
            temperature=temperature,
            prompt_tokens=len(prompt.split()),
            completion_tokens=n_tokens,
            cost_usd=self.spec.cost_per_call,
            latency_s=0.0,
            token_logprobs=token_logprobs,
        )

    def generate(self, prompt: str, temperature: float, want_logprobs: bool) -> AgentOutput:
        scope = _draw_scope.get()
        index = self._next_index(scope, _digest(prompt))
        return self.draw(prompt, index, temperature, want_logprobs, scope)
