"""Prompt-Bibliothek: Vorlagen werden als Daten ausgeliefert."""

import logging
from importlib import resources
from string import Template
from typing import Any, Dict, List, Optional

import yaml

from ..exceptions import ConfigValidationError

logger = logging.getLogger(__name__)

DEFAULT_PROMPT_RESOURCE = "default_prompts.yaml"


class PromptLibrary:
    """Hält Vorlagen, Paritäts-Instruktionen, Decoder-Prüfpunkte und Turbo-Linsen."""

    def __init__(self, data: Optional[Dict[str, Any]] = None) -> None:
        data = data if data is not None else self._load_default()
        self.templates: Dict[str, str] = dict(data.get("templates", {}))
        self.parity_instructions: Dict[str, str] = dict(data.get("parity_instructions", {}))
        self.decoder_checks: Dict[str, str] = dict(data.get("decoder_checks", {}))
        self.turbo_lenses: List[str] = list(data.get("turbo_lenses", []))

    @staticmethod
    def _load_default() -> Dict[str, Any]:
        text = (
            resources.files("reliability_engine.core")
            .joinpath("templates").joinpath(DEFAULT_PROMPT_RESOURCE)
            .read_text(encoding="utf-8")
        )
        return yaml.safe_load(text)

    def merged(self, overrides: Dict[str, Any]) -> "PromptLibrary":
        """Neue Bibliothek mit überschriebenen Einträgen."""
        merged = PromptLibrary(
            {
                "templates": {**self.templates, **overrides.get("templates", {})},
                "parity_instructions": {
                    **self.parity_instructions,
                    **overrides.get("parity_instructions", {}),
                },
                "decoder_checks": {**self.decoder_checks, **overrides.get("decoder_checks", {})},
                "turbo_lenses": overrides.get("turbo_lenses", self.turbo_lenses),
            }
        )
        return merged

    def render(self, name: str, **fields: Any) -> str:
        """Füllt eine Vorlage; fehlende Platzhalter sind ein Konfigurationsfehler."""
        try:
            template = self.templates[name]
        except KeyError:
            raise ConfigValidationError(f"Unbekannte Prompt-Vorlage: {name}")
        try:
            return Template(template).substitute(**{k: str(v) for k, v in fields.items()})
        except KeyError as e:
            raise ConfigValidationError(f"Vorlage {name}: Platzhalter {e} fehlt")
