"""Führt ein Experiment aus: jede (Aufgabe, Technik, Wiederholung) ergibt genau einen RunRecord."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..channel.channel import Channel
from ..channel.synthetic_backend import draw_scope
from ..core.context import EngineConfig, TechniqueContext
from ..core.registry import ChannelRoles, run_technique
from ..core.run_models import RUN_FAILED, RunRecord, Task, TechniqueConfig, TechniqueName
from ..exceptions import ChannelTransportError, ConfigValidationError
from ..routing.acm_router import pilot_estimate
from ..routing.routing_models import McsTable
from ..utils.config_loader import ConfigLoader
from .harness_models import ROLE_NAMES, ExperimentConfig
from .run_cache import RunCache

logger = logging.getLogger(__name__)

_ROUTER_PARAMS = {"lam"}
_ACM = {TechniqueName.ACM, TechniqueName.SOFT_ACM}


@dataclass
class RunSummary:
    """Zählt neu ausgeführte, übersprungene und fehlgeschlagene Läufe."""

    executed: int = 0
    skipped: int = 0
    failed: int = 0
    failures: List[str] = field(default_factory=list)

    def __iadd__(self, other: "RunSummary") -> "RunSummary":
        self.executed += other.executed
        self.skipped += other.skipped
        self.failed += other.failed
        self.failures.extend(other.failures)
        return self


def scope_key(task_id: str, technique: str, repeat_index: int) -> str:
    return f"{task_id}|{technique}|{repeat_index}"


class ExperimentRunner:
    """Baut Kanäle, Rollen und Kontext aus einer ExperimentConfig und füllt den RunCache."""

    def __init__(
        self,
        config: ExperimentConfig,
        tasks: Optional[List[Task]] = None,
        loader: Optional[ConfigLoader] = None,
        channels: Optional[Dict[str, Channel]] = None,
    ) -> None:
        self.config = config
        self.loader = loader or ConfigLoader()
        self.tasks = tasks if tasks is not None else self.loader.tasks_for(config)
        self.channels = channels or {c.label: Channel(c) for c in config.channels}
        self.cache = RunCache(config.cache_dir)

        prompts = self.loader.load_prompts(config.prompts_file) if config.prompts_file else None
        checklists = (
            self.loader.load_checklists(config.checklists_file) if config.checklists_file else None
        )
        self.context = TechniqueContext(
            self.channels[config.judge],
            prompts=prompts,
            checklists=checklists,
            config=EngineConfig(max_workers=config.max_workers),
        )
        self.roles = self._roles(config.pool_names())
        self._tables: Dict[str, McsTable] = {}

    def _channel(self, name: str) -> Channel:
        if name not in self.channels:
            raise ConfigValidationError(f"Kanal {name} nicht definiert")
        return self.channels[name]

    def _roles(self, pool: List[str]) -> ChannelRoles:
        named = {role: self._channel(self.config.roles[role]) for role in ROLE_NAMES
                 if role in self.config.roles}
        return ChannelRoles([self._channel(n) for n in pool], **named)

    def _table(self, path: str) -> McsTable:
        if path not in self._tables:
            self._tables[path] = self.loader.load_mcs_table(path)
        return self._tables[path]

    def technique_params(self, technique: TechniqueConfig) -> Dict[str, Any]:
        """Overrides ohne Router-Parameter; ACM erhält die geladene MCS-Tabelle."""
        params = {k: v for k, v in technique.overrides().items() if k not in _ROUTER_PARAMS}
        if technique.technique in _ACM:
            path = technique.profiles or self.config.mcs_table
            if path:
                params["profiles"] = self._table(path)
            elif technique.technique == TechniqueName.ACM:
                raise ConfigValidationError(f"{technique.name}: keine MCS-Tabelle konfiguriert")
        return params

    # Pilot

    def record_pilots(self) -> Dict[str, Dict[str, Any]]:
        """Pilot-Schwierigkeit je Aufgabe nach ``pilot.json`` (bereits vorhandene bleiben)."""
        pilot = self.cache.load_pilot()
        channel = self.roles.role("pilot")
        added = 0
        for task in self.tasks:
            if task.id in pilot:
                continue
            with draw_scope(scope_key(task.id, "pilot", 0)):
                estimate = pilot_estimate(channel, task, self.context.prompts)
            pilot[task.id] = {
                "difficulty": estimate.difficulty,
                "confidence": estimate.confidence,
                "source": estimate.source.value,
                "degraded": estimate.degraded,
                "cost": sum(o.cost_usd for o in estimate.outputs),
            }
            added += 1
        if added:
            self.cache.save_pilot(pilot)
            logger.info(f"Pilot-Schätzung für {added} Tasks gespeichert")
        return pilot

    # Ausführung

    def _failure_record(
        self, task: Task, label: str, repeat: int, error: ChannelTransportError
    ) -> RunRecord:
        return RunRecord(
            task_id=task.id,
            technique=label,
            repeat_index=repeat,
            final_quality=0.0,
            rounds=0,
            flags={RUN_FAILED},
            metadata={"error": str(error), "status_code": error.status_code},
        )

    def run_one(self, task: Task, technique: TechniqueConfig, repeat: int) -> RunRecord:
        """Ein Lauf mit deterministischem Draw-Scope; Transportfehler werden als Record festgehalten."""
        roles = self.roles
        if technique.channels:
            roles = self._roles(technique.channels)
        params = self.technique_params(technique)
        with draw_scope(scope_key(task.id, technique.name, repeat)):
            try:
                record = run_technique(technique.technique, roles, task, self.context, params)
            except ChannelTransportError as e:
                logger.warning(f"{technique.name} auf {task.id} (Wdh. {repeat}) fehlgeschlagen: {e}")
                return self._failure_record(task, technique.name, repeat, e)
        record.technique = technique.name
        record.repeat_index = repeat
        return record

    def _run_task(self, task: Task) -> RunSummary:
        summary = RunSummary()
        for technique in self.config.techniques:
            for repeat in range(self.config.repeats):
                existing = self.cache.get(task.id, technique.name, repeat)
                if existing is not None and not existing.failed:
                    summary.skipped += 1
                    continue
                record = self.run_one(task, technique, repeat)
                self.cache.add(record)
                summary.executed += 1
                if record.failed:
                    summary.failed += 1
                    summary.failures.append(scope_key(task.id, technique.name, repeat))
        return summary

    def run(self) -> RunSummary:
        """Führt fehlende und fehlgeschlagene Läufe aus; ein vollständiger Cache ruft keinen Kanal.

        Aufgaben laufen parallel (bis ``max_concurrency``), sofern alle Kanäle
        parallele Aufrufe erlauben; der Simulator läuft sequentiell.
        """
        self.cache.save_tasks(self.tasks)
        self.record_pilots()
        parallel = self.config.max_concurrency > 1 and all(
            c.supports_parallel for c in self.channels.values()
        )
        summary = RunSummary()
        if parallel:
            with ThreadPoolExecutor(max_workers=self.config.max_concurrency) as pool:
                for part in pool.map(self._run_task, self.tasks):
                    summary += part
        else:
            for task in self.tasks:
                summary += self._run_task(task)
        logger.info(
            f"Experiment '{self.config.name}': {summary.executed} ausgeführt, "
            f"{summary.skipped} übersprungen, {summary.failed} fehlgeschlagen"
        )
        return summary


def run_experiment(config_path: Union[str, Path]) -> RunCache:
    """Lädt die Konfiguration, füllt den Cache und gibt ihn zurück."""
    loader = ConfigLoader()
    config = loader.load_experiment(config_path)
    runner = ExperimentRunner(config, loader=loader)
    runner.run()
    return runner.cache
