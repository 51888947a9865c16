"""Konfigurationslader für Experimente, Aufgaben, Checklisten, Prompts und MCS-Tabellen."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import ValidationError

from ..core.prompts import PromptLibrary
from ..core.run_models import Task, TaskCategory
from ..exceptions import ConfigValidationError
from ..harness.harness_models import ExperimentConfig
from ..routing.routing_models import McsTable, ProfileKey
from ..scoring.score_models import ChecklistSet
from ..scoring.scoring_engine import checklists_from_data

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CATEGORY_ALIASES = {
    "math": TaskCategory.REASONING,
    "logic": TaskCategory.REASONING,
    "gsm8k": TaskCategory.REASONING,
    "coding": TaskCategory.CODE,
    "programming": TaskCategory.CODE,
    "humaneval": TaskCategory.CODE,
    "factual": TaskCategory.QA,
    "knowledge": TaskCategory.QA,
    "mmlu": TaskCategory.QA,
    "writing": TaskCategory.CREATIVE,
    "story": TaskCategory.CREATIVE,
}


@dataclass
class LoaderConfig:
    """Globale Einstellungen des Laders."""

    base_dir: Optional[Path] = None
    resolve_paths: bool = True

    def __post_init__(self) -> None:
        if self.base_dir is not None:
            self.base_dir = Path(self.base_dir)


class ConfigLoader:
    """Lädt YAML/JSON-Dateien in die pydantic-Modelle des Pakets."""

    def __init__(self, config: Optional[LoaderConfig] = None) -> None:
        self.config = config or LoaderConfig()

    def _resolve(self, path: PathLike) -> Path:
        path = Path(path)
        if not path.is_absolute() and self.config.base_dir is not None:
            path = self.config.base_dir / path
        return path

    def read(self, path: PathLike) -> Any:
        """Liest ``.yaml``/``.yml`` per safe_load und ``.json`` per json.load."""
        filepath = self._resolve(path)
        suffix = filepath.suffix.lower()
        if suffix not in (".yaml", ".yml", ".json"):
            raise ConfigValidationError(f"Unbekanntes Dateiformat: {filepath}")
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                return json.load(f) if suffix == ".json" else yaml.safe_load(f)
        except (OSError, ValueError, yaml.YAMLError) as e:
            logger.error(f"Fehler beim Laden von {filepath}: {e}")
            raise ConfigValidationError(f"{filepath} nicht lesbar: {e}") from e

    @staticmethod
    def _items(data: Any, key: str, filepath: PathLike) -> List[Any]:
        if isinstance(data, dict) and key in data:
            return list(data[key] or [])
        if isinstance(data, list):
            return data
        raise ConfigValidationError(f"Unerwartetes Format in {filepath}: '{key}' oder Liste erwartet")

    # Experimente

    def load_experiment(self, path: PathLike) -> ExperimentConfig:
        """Lädt eine Experiment-Konfiguration; relative Pfade gelten relativ zur Datei."""
        filepath = self._resolve(path)
        data = self.read(filepath)
        if not isinstance(data, dict):
            raise ConfigValidationError(f"Experiment-Konfiguration {filepath} muss ein Mapping sein")
        if self.config.resolve_paths:
            base = filepath.parent
            data.setdefault("cache_dir", "cache")
            for key in ("tasks_file", "cache_dir", "checklists_file", "prompts_file", "mcs_table"):
                if data.get(key):
                    data[key] = str(base / data[key]) if not Path(data[key]).is_absolute() else data[key]
            for technique in data.get("techniques") or []:
                if isinstance(technique, dict) and technique.get("profiles"):
                    profiles = Path(technique["profiles"])
                    technique["profiles"] = str(profiles if profiles.is_absolute() else base / profiles)
        if isinstance(data.get("tasks"), list):
            data["tasks"] = [self._task_data(t) for t in data["tasks"]]
        try:
            config = ExperimentConfig.parse_obj(data)
        except ValidationError as e:
            logger.error(f"Ungültige Experiment-Konfiguration {filepath}: {e}")
            raise ConfigValidationError(f"Ungültige Experiment-Konfiguration {filepath}: {e}") from e
        logger.info(
            f"Geladen: Experiment '{config.name}' mit {len(config.channels)} Kanälen, "
            f"{len(config.techniques)} Techniken aus {filepath}"
        )
        return config

    def tasks_for(self, config: ExperimentConfig) -> List[Task]:
        """Inline-Aufgaben plus die der Task-Datei; IDs müssen eindeutig sein."""
        tasks = list(config.tasks)
        if config.tasks_file:
            tasks += self.load_tasks(config.tasks_file)
        if not tasks:
            raise ConfigValidationError(f"Experiment '{config.name}' hat keine Aufgaben")
        self._check_unique(tasks, config.name)
        return tasks

    # Aufgaben

    def load_tasks(self, path: PathLike) -> List[Task]:
        """Lädt Aufgaben aus ``{tasks: [...]}`` oder einer bloßen Liste."""
        data = self.read(path)
        tasks = []
        for item in self._items(data, "tasks", path):
            try:
                tasks.append(Task.parse_obj(self._task_data(item)))
            except ValidationError as e:
                raise ConfigValidationError(f"Ungültige Aufgabe in {path}: {e}") from e
        self._check_unique(tasks, str(path))
        logger.info(f"Geladen: {len(tasks)} Tasks aus {path}")
        return tasks

    @staticmethod
    def _check_unique(tasks: List[Task], source: str) -> None:
        ids = [t.id for t in tasks]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ConfigValidationError(f"Doppelte Task-IDs in {source}: {duplicates}")

    def _task_data(self, item: Any) -> Dict[str, Any]:
        if not isinstance(item, dict):
            raise ConfigValidationError(f"Aufgabe muss ein Mapping sein: {item!r}")
        data = dict(item)
        if "category" in data:
            data["category"] = self.parse_category(str(data["category"]))
        checks = data.get("objective_checks") or []
        data["objective_checks"] = [
            {"pattern": c, "weight": 1.0} if isinstance(c, str) else c for c in checks
        ]
        return data

    @staticmethod
    def parse_category(category_str: str) -> TaskCategory:
        """Normalisiert Kategorie-Namen; Aliase mit Warnung, Unbekanntes wird OTHER."""
        category_str = category_str.lower().strip()
        if category_str in CATEGORY_ALIASES:
            category = CATEGORY_ALIASES[category_str]
            logger.warning(f"Kategorie '{category_str}' als '{category.value}' interpretiert")
            return category
        try:
            return TaskCategory(category_str)
        except ValueError:
            logger.warning(f"Unbekannte Kategorie '{category_str}', nutze OTHER")
            return TaskCategory.OTHER

    # Checklisten, Prompts, MCS-Tabellen

    def load_checklists(self, path: PathLike) -> ChecklistSet:
        data = self.read(path)
        if not isinstance(data, dict):
            raise ConfigValidationError(f"Checklisten-Datei {path} muss ein Mapping sein")
        checklists = checklists_from_data(data)
        logger.info(f"Geladen: Checklisten aus {path}")
        return checklists

    def load_prompts(self, path: PathLike, base: Optional[PromptLibrary] = None) -> PromptLibrary:
        """Überschreibt die mitgelieferten Vorlagen mit denen der Datei."""
        data = self.read(path)
        if not isinstance(data, dict):
            raise ConfigValidationError(f"Prompt-Datei {path} muss ein Mapping sein")
        if "templates" not in data:
            data = {"templates": data}
        return (base or PromptLibrary()).merged(data)

    def load_mcs_table(self, path: PathLike) -> McsTable:
        """Lädt eine MCS-Tabelle aus ``{profiles: [...]}`` oder einer bloßen Liste."""
        data = self.read(path)
        profiles = self._items(data, "profiles", path)
        meta = data if isinstance(data, dict) else {}
        try:
            table = McsTable(
                name=meta.get("name", Path(path).stem),
                key=ProfileKey(meta.get("key", ProfileKey.DIFFICULTY.value)),
                profiles=profiles,
            )
        except (ValidationError, ValueError) as e:
            raise ConfigValidationError(f"Ungültige MCS-Tabelle {path}: {e}") from e
        logger.info(f"Geladen: MCS-Tabelle '{table.name}' mit {len(table.profiles)} Profilen")
        return table
