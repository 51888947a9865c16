"""Logging-Konfiguration für die Reliability Engine."""

import logging
import logging.handlers
import sys
from pathlib import Path
from typing import Dict, Optional

import colorlog

from ..channel.synthetic_backend import current_draw_scope

NO_SCOPE = "-"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(run_scope)s] %(message)s"
DETAILED_FORMAT = (
    "%(asctime)s - %(name)s - %(levelname)s - [%(run_scope)s] "
    "%(filename)s:%(lineno)d - %(funcName)s() - %(message)s"
)
LOG_COLORS = {
    "DEBUG": "cyan",
    "INFO": "green",
    "WARNING": "yellow",
    "ERROR": "red",
    "CRITICAL": "red,bg_white",
}
# HTTP-Bibliotheken sind auf DEBUG zu gesprächig
QUIET_LOGGERS = ("urllib3", "requests")


class RunScopeFilter(logging.Filter):
    """Hängt den aktiven Lauf (``task|technik|wdh``) als ``run_scope`` an jeden Record."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.run_scope = current_draw_scope() or NO_SCOPE
        return True


def _level(name: str) -> int:
    level = logging.getLevelName(name.upper())
    if not isinstance(level, int):
        raise ValueError(f"Unbekanntes Logging-Level: {name}")
    return level


def setup_logging(
    level: str = "INFO",
    log_file: Optional[Path] = None,
    console: bool = True,
    colored: bool = True,
    rotation: bool = True,
    max_bytes: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5,
    package_levels: Optional[Dict[str, str]] = None,
) -> logging.Logger:
    """Konfiguriert das Logging-System.

    Jede Zeile trägt den Draw-Scope des laufenden Experiments, so dass sich
    Kanal- und Judge-Meldungen einem (Aufgabe, Technik, Wiederholung) zuordnen lassen.

    Args:
        level: Logging-Level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Pfad zur Log-Datei (optional)
        console: Ob auf stderr geloggt werden soll
        colored: Ob farbige Ausgabe verwendet werden soll
        rotation: Ob Log-Rotation aktiviert werden soll
        max_bytes: Maximale Größe einer Log-Datei
        backup_count: Anzahl der Backup-Dateien
        package_levels: Abweichende Level je Logger, z.B. ``{"reliability_engine.channel": "DEBUG"}``

    Returns:
        Konfigurierter Root-Logger
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(_level(level))
    root_logger.handlers.clear()
    scope_filter = RunScopeFilter()

    if console:
        console_handler: logging.Handler
        if colored:
            console_handler = colorlog.StreamHandler(sys.stderr)
            console_handler.setFormatter(
                colorlog.ColoredFormatter(
                    "%(log_color)s" + LOG_FORMAT,
                    datefmt="%Y-%m-%d %H:%M:%S",
                    log_colors=LOG_COLORS,
                )
            )
        else:
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        console_handler.addFilter(scope_filter)
        root_logger.addHandler(console_handler)

    if log_file:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)

        file_handler: logging.Handler
        if rotation:
            file_handler = logging.handlers.RotatingFileHandler(
                log_file,
                maxBytes=max_bytes,
                backupCount=backup_count,
                encoding="utf-8",
            )
        else:
            file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(DETAILED_FORMAT))
        file_handler.addFilter(scope_filter)
        root_logger.addHandler(file_handler)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)
    for name, package_level in (package_levels or {}).items():
        logging.getLogger(name).setLevel(_level(package_level))

    return root_logger
