"""Embedding-Quellen für den semKNN-Router."""

import hashlib
import logging
import os
import re
import time
from typing import Callable, Dict, List, Optional, Protocol, Sequence

import numpy as np
import requests

from ..exceptions import ChannelTransportError, ConfigValidationError

logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"[a-z0-9]+")


class Embedder(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        ...


class HashEmbedder:
    """Deterministisches Feature-Hashing von Wort-Uni- und Bigrammen, L2-normiert."""

    def __init__(self, dimension: int = 256) -> None:
        if dimension < 2:
            raise ConfigValidationError("dimension muss >= 2 sein")
        self.dimension = dimension

    def _vector(self, text: str) -> np.ndarray:
        tokens = _TOKEN.findall(text.lower())
        features = tokens + [f"{a}_{b}" for a, b in zip(tokens, tokens[1:])]
        vec = np.zeros(self.dimension)
        for feature in features:
            digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "big")
            vec[value % self.dimension] += 1.0 if (value >> 63) == 0 else -1.0
        norm = np.linalg.norm(vec)
        if norm == 0:
            vec[0] = 1.0
            return vec
        return vec / norm

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        return [self._vector(t).tolist() for t in texts]


class HttpEmbedder:
    """Client für OpenAI-kompatible ``POST {endpoint_url}/embeddings``-Endpunkte."""

    def __init__(
        self,
        endpoint_url: str,
        model_id: str,
        dimension: int,
        api_key_env: Optional[str] = None,
        timeout_s: float = 60.0,
        retries: int = 3,
        session: Optional[requests.Session] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.endpoint_url = endpoint_url.rstrip("/")
        self.model_id = model_id
        self.dimension = dimension
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s
        self.retries = retries
        self.session = session or requests.Session()
        self._sleep = sleep

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env) if self.api_key_env else None
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        url = f"{self.endpoint_url}/embeddings"
        payload = {"model": self.model_id, "input": list(texts)}
        last_error = ""
        vectors: List[List[float]] = []
        for attempt in range(1, self.retries + 2):
            try:
                response = self.session.post(
                    url, json=payload, headers=self._headers(), timeout=self.timeout_s
                )
                response.raise_for_status()
                data = sorted(response.json()["data"], key=lambda d: d.get("index", 0))
                vectors = [list(map(float, d["embedding"])) for d in data]
                break
            except (requests.RequestException, KeyError, TypeError, ValueError) as e:
                last_error = str(e)
                if attempt > self.retries:
                    raise ChannelTransportError(
                        f"Embedding-Endpunkt {url} fehlgeschlagen: {last_error}", attempts=attempt
                    ) from e
                logger.warning(f"Embedding-Versuch {attempt} fehlgeschlagen: {last_error}")
                self._sleep(float(2 ** (attempt - 1)))

        if any(len(v) != self.dimension for v in vectors):
            raise ConfigValidationError(
                f"Embedding-Dimension weicht ab (erwartet {self.dimension})"
            )
        return vectors
