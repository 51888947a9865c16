"""Persistenter Cache der RunRecords: eine JSON-Datei je Technik."""

import json
import logging
import os
import re
import tempfile
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from ..core.run_models import RunRecord, Task
from ..exceptions import ConfigValidationError

logger = logging.getLogger(__name__)

PILOT_FILE = "pilot.json"
TASKS_FILE = "tasks.json"
_RESERVED = {PILOT_FILE, TASKS_FILE}
_SAFE = re.compile(r"[^A-Za-z0-9_.-]+")

RecordKey = Tuple[str, int]


def _atomic_write(path: Path, payload: Any) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, ensure_ascii=False, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class RunCache:
    """Verzeichnis mit ``<technik>.json`` (Array von RunRecords), ``pilot.json`` und ``tasks.json``.

    Schreibzugriffe sind prozessintern exklusiv und atomar (temp-Datei + rename).
    """

    def __init__(self, directory: Union[str, Path]) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._records: Dict[str, Dict[RecordKey, RunRecord]] = {}

    def _path(self, technique: str) -> Path:
        return self.directory / f"{_SAFE.sub('_', technique)}.json"

    def _load(self, technique: str) -> Dict[RecordKey, RunRecord]:
        if technique not in self._records:
            path = self._path(technique)
            records: Dict[RecordKey, RunRecord] = {}
            if path.exists():
                try:
                    data = json.loads(path.read_text(encoding="utf-8"))
                    for item in data:
                        record = RunRecord.parse_obj(item)
                        records[(record.task_id, record.repeat_index)] = record
                except (OSError, ValueError) as e:
                    logger.error(f"Cache-Datei {path} nicht lesbar: {e}")
                    raise ConfigValidationError(f"Cache-Datei {path} nicht lesbar: {e}") from e
                logger.debug(f"Geladen: {len(records)} Records aus {path}")
            self._records[technique] = records
        return self._records[technique]

    def techniques(self) -> List[str]:
        """Alle Techniken mit Cache-Datei, sortiert."""
        on_disk = {
            p.stem for p in self.directory.glob("*.json") if p.name not in _RESERVED
        }
        return sorted(on_disk | set(self._records))

    def has(self, task_id: str, technique: str, repeat_index: int) -> bool:
        return (task_id, repeat_index) in self._load(technique)

    def get(self, task_id: str, technique: str, repeat_index: int) -> Optional[RunRecord]:
        return self._load(technique).get((task_id, repeat_index))

    def records(self, technique: str) -> List[RunRecord]:
        return sorted(self._load(technique).values(), key=lambda r: (r.task_id, r.repeat_index))

    def all_records(self) -> Dict[str, List[RunRecord]]:
        return {t: self.records(t) for t in self.techniques()}

    def add(self, record: RunRecord) -> None:
        """Fügt einen Record hinzu (ersetzt gleichen Schlüssel) und schreibt die Datei neu."""
        with self._lock:
            records = self._load(record.technique)
            records[(record.task_id, record.repeat_index)] = record
            payload = [
                json.loads(r.json())
                for r in sorted(records.values(), key=lambda r: (r.task_id, r.repeat_index))
            ]
            _atomic_write(self._path(record.technique), payload)

    # Pilot-Schätzungen und Task-Snapshot

    def load_pilot(self) -> Dict[str, Dict[str, Any]]:
        path = self.directory / PILOT_FILE
        if not path.exists():
            return {}
        return json.loads(path.read_text(encoding="utf-8"))

    def save_pilot(self, pilot: Dict[str, Dict[str, Any]]) -> None:
        with self._lock:
            _atomic_write(self.directory / PILOT_FILE, pilot)

    def pilot_difficulties(self) -> Dict[str, float]:
        return {task_id: float(entry["difficulty"]) for task_id, entry in self.load_pilot().items()}

    def save_tasks(self, tasks: List[Task]) -> None:
        with self._lock:
            _atomic_write(self.directory / TASKS_FILE, [json.loads(t.json()) for t in tasks])

    def load_tasks(self) -> List[Task]:
        path = self.directory / TASKS_FILE
        if not path.exists():
            raise ConfigValidationError(f"Kein Task-Snapshot in {self.directory}")
        return [Task.parse_obj(item) for item in json.loads(path.read_text(encoding="utf-8"))]
