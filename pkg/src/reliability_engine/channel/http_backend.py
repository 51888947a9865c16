"""HTTP-Backend für OpenAI-kompatible Chat-Completions-Endpunkte."""

import logging
import os
import re
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import requests

from ..exceptions import ChannelTransportError
from .channel_models import AgentOutput, ChannelConfig

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}
BACKOFF_SECONDS = (1.0, 2.0, 4.0)


def strip_thinking(text: str, markers: List[Tuple[str, str]]) -> str:
    """Entfernt Thinking-Blöcke (z.B. ``<think>…</think>``) aus dem Text."""
    for open_tag, close_tag in markers:
        pattern = re.escape(open_tag) + r".*?" + re.escape(close_tag)
        text = re.sub(pattern, "", text, flags=re.DOTALL)
        # Nicht geschlossener Block am Ende
        if open_tag in text:
            text = text.split(open_tag, 1)[0]
    return text.strip()


class HttpBackend:
    """Synchroner Client für ``POST {endpoint_url}/chat/completions``."""

    supports_parallel = True

    def __init__(
        self,
        config: ChannelConfig,
        session: Optional[requests.Session] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.config = config
        self.session = session or requests.Session()
        self._sleep = sleep

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            token = os.environ.get(self.config.api_key_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
            else:
                logger.warning(f"Umgebungsvariable {self.config.api_key_env} ist nicht gesetzt")
        return headers

    def _payload(self, prompt: str, temperature: float, want_logprobs: bool) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        if want_logprobs:
            payload["logprobs"] = True
        if self.config.max_tokens is not None:
            payload["max_tokens"] = self.config.max_tokens
        return payload

    def _post(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        url = f"{self.config.endpoint_url}/chat/completions"
        attempts = len(BACKOFF_SECONDS) + 1
        last_error: Optional[str] = None
        last_status: Optional[int] = None

        for attempt in range(1, attempts + 1):
            try:
                response = self.session.post(
                    url, json=payload, headers=self._headers(), timeout=self.config.timeout_s
                )
            except (requests.ConnectionError, requests.Timeout) as e:
                last_error, last_status = str(e), None
            else:
                last_status = response.status_code
                last_error = response.text[:200]
                if last_status < 400:
                    try:
                        return response.json()
                    except ValueError:
                        logger.warning(
                            f"{self.config.label}: HTTP {last_status} ohne gültiges JSON: "
                            f"{last_error!r}"
                        )
                elif last_status not in RETRYABLE_STATUS:
                    logger.error(f"{self.config.label}: HTTP {last_status}, kein Retry")
                    raise ChannelTransportError(
                        f"HTTP {last_status} von {url}: {last_error}",
                        status_code=last_status,
                        attempts=attempt,
                    )

            if attempt < attempts:
                delay = BACKOFF_SECONDS[attempt - 1]
                logger.warning(
                    f"{self.config.label}: Versuch {attempt}/{attempts} fehlgeschlagen "
                    f"({last_status or last_error}), neuer Versuch in {delay:.0f}s"
                )
                self._sleep(delay)

        logger.error(f"{self.config.label}: Endpunkt nach {attempts} Versuchen nicht erreichbar")
        raise ChannelTransportError(
            f"{url} nicht erreichbar: {last_error}", status_code=last_status, attempts=attempts
        )

    def generate(self, prompt: str, temperature: float, want_logprobs: bool) -> AgentOutput:
        start = time.perf_counter()
        data = self._post(self._payload(prompt, temperature, want_logprobs))
        latency = time.perf_counter() - start

        try:
            choice = data["choices"][0]
            raw_text = choice["message"].get("content") or ""
        except (KeyError, IndexError, TypeError) as e:
            raise ChannelTransportError(f"Unerwartete Antwortstruktur: {e}") from e

        usage = data.get("usage") or {}
        prompt_tokens = int(usage.get("prompt_tokens", 0))
        completion_tokens = int(usage.get("completion_tokens", 0))
        text = strip_thinking(raw_text, self.config.thinking_markers)
        if text and completion_tokens < 1:
            completion_tokens = max(1, len(raw_text.split()))

        token_logprobs: Optional[List[float]] = None
        if want_logprobs:
            content = (choice.get("logprobs") or {}).get("content") or []
            token_logprobs = [min(0.0, float(t["logprob"])) for t in content if "logprob" in t]

        cost = (
            prompt_tokens * self.config.price_per_input_token
            + completion_tokens * self.config.price_per_output_token
        )
        return AgentOutput(
            text=text,
            model_id=self.config.model_id,
            temperature=temperature,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            cost_usd=cost,
            latency_s=latency,
            token_logprobs=token_logprobs or None,
        )
