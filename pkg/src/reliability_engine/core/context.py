"""Laufzeitkontext der Techniken: Judge, Prompts, Fan-out und Lauf-Protokoll."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, TypeVar, Union

from ..channel.channel import Channel, ChannelLike, get_channel
from ..channel.channel_models import AgentOutput
from ..exceptions import ChannelTransportError, ConfigValidationError
from ..scoring.score_models import ChecklistSet, QualityScore
from ..scoring.scoring_engine import ScoringEngine
from .prompts import PromptLibrary
from .run_models import RunRecord, Task, TaskLike

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass
class EngineConfig:
    """Globale Laufzeit-Einstellungen der Techniken."""

    max_workers: int = 8
    parallel: bool = True

    def __post_init__(self) -> None:
        if self.max_workers < 1:
            raise ConfigValidationError("max_workers muss >= 1 sein")


class TechniqueContext:
    """Bündelt Judge (Scoring Engine), Prompt-Bibliothek und Fan-out-Einstellungen."""

    def __init__(
        self,
        judge: ChannelLike,
        prompts: Optional[PromptLibrary] = None,
        checklists: Optional[ChecklistSet] = None,
        config: Optional[EngineConfig] = None,
    ) -> None:
        self.config = config or EngineConfig()
        self.prompts = prompts or PromptLibrary()
        self.scorer = ScoringEngine(judge, checklists, self.prompts)

    def fan_out(
        self, calls: Sequence[Callable[[], T]], parallel: bool = True
    ) -> List[Union[T, ChannelTransportError]]:
        """Führt Aufrufe aus und liefert Ergebnisse oder Transportfehler in Eingabereihenfolge."""

        def guarded(call: Callable[[], T]) -> Union[T, ChannelTransportError]:
            try:
                return call()
            except ChannelTransportError as e:
                return e

        if not calls:
            return []
        if not (parallel and self.config.parallel) or len(calls) == 1:
            return [guarded(c) for c in calls]
        workers = min(len(calls), self.config.max_workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(guarded, calls))

    def channels(self, channels: Sequence[ChannelLike]) -> List[Channel]:
        pool = [get_channel(c) for c in channels]
        if not pool:
            raise ConfigValidationError("Mindestens ein Kanal erforderlich")
        return pool

    @staticmethod
    def parallel_ok(channels: Sequence[Channel]) -> bool:
        return all(c.supports_parallel for c in channels)

    @property
    def judge_parallel(self) -> bool:
        return self.scorer.judge.supports_parallel


class RunRecorder:
    """Sammelt Ausgaben, Judge-Aufrufe und Flags eines Laufs und baut den RunRecord."""

    def __init__(self, task: TaskLike, technique: str) -> None:
        self.task: Task = Task.coerce(task)
        self.technique = technique
        self.individual: List[AgentOutput] = []
        self.overhead: List[AgentOutput] = []
        self.judge: List[AgentOutput] = []
        self.individual_scores: List[float] = []
        self.flags: Set[str] = set()
        self.metadata: Dict[str, Any] = {}
        self.rounds = 0
        self._start = time.time()

    def add_individual(self, output: AgentOutput) -> AgentOutput:
        self.individual.append(output)
        return output

    def add_overhead(self, output: AgentOutput) -> AgentOutput:
        self.overhead.append(output)
        return output

    def add_score(self, score: QualityScore, individual: bool = False) -> QualityScore:
        self.judge.extend(score.judge_outputs)
        if score.degraded:
            self.flag("judge_degraded")
        if individual:
            self.individual_scores.append(score.value)
        return score

    def flag(self, name: str) -> None:
        self.flags.add(name)

    def merge(self, record: RunRecord) -> None:
        """Übernimmt Ausgaben eines Unterlaufs (z.B. die von ACM gewählte Technik)."""
        self.individual.extend(record.individual_outputs)
        self.overhead.extend(record.overhead_outputs)
        self.judge.extend(record.judge_outputs)
        self.individual_scores.extend(record.individual_scores)
        self.flags |= record.flags
        self.rounds += record.rounds

    def finish(self, text: str, quality: float, rounds: Optional[int] = None) -> RunRecord:
        self.metadata.setdefault("processing_time", round(time.time() - self._start, 4))
        record = RunRecord(
            task_id=self.task.id,
            technique=self.technique,
            individual_outputs=self.individual,
            overhead_outputs=self.overhead,
            judge_outputs=self.judge,
            combined_text=text,
            final_quality=min(1.0, max(0.0, quality)),
            individual_scores=self.individual_scores,
            rounds=self.rounds if rounds is None else rounds,
            flags=self.flags,
            metadata=self.metadata,
        )
        logger.debug(
            f"{self.technique} auf {self.task.id}: q={record.final_quality:.4f}, "
            f"Kosten {record.total_cost:.6f}, Flags {sorted(record.flags)}"
        )
        return record
