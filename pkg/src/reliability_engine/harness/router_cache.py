"""Router-Cache: Wiederholungen je Aufgabe zu Technik-Mittelwerten verdichten und einbetten."""

import json
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

from ..core.run_models import RunRecord, Task, TechniqueName
from ..exceptions import ConfigValidationError, ReliabilityError
from ..routing.embeddings import Embedder, HashEmbedder, HttpEmbedder
from ..routing.routing_models import CacheEntry, TechniqueOutcome
from .harness_models import EmbeddingConfig, EmbeddingKind
from .run_cache import RunCache

logger = logging.getLogger(__name__)

BASELINE = TechniqueName.BASELINE.value


def make_embedder(config: EmbeddingConfig) -> Embedder:
    if config.kind == EmbeddingKind.HASH:
        return HashEmbedder(config.dimension)
    return HttpEmbedder(
        endpoint_url=config.endpoint_url,
        model_id=config.model_id or "text-embedding",
        dimension=config.dimension,
        api_key_env=config.api_key_env,
    )


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def aggregate_outcomes(
    records: Mapping[str, Sequence[RunRecord]],
) -> Dict[str, Dict[str, TechniqueOutcome]]:
    """task_id → Technik → Mittel von Qualität und Kosten über die Wiederholungen.

    Fehlgeschlagene Läufe gehen nicht ein; scheitern alle Wiederholungen, fehlt
    die Technik für diese Aufgabe wie eine nie gelaufene.
    """
    grouped: Dict[str, Dict[str, List[RunRecord]]] = defaultdict(lambda: defaultdict(list))
    for technique, items in records.items():
        for record in items:
            if record.failed:
                continue
            grouped[record.task_id][technique].append(record)
    return {
        task_id: {
            technique: TechniqueOutcome(
                quality=_mean([r.final_quality for r in items]),
                cost=_mean([r.total_cost for r in items]),
            )
            for technique, items in sorted(per_technique.items())
        }
        for task_id, per_technique in sorted(grouped.items())
    }


def build_router_cache(
    cache: Union[RunCache, Mapping[str, Sequence[RunRecord]]],
    tasks: Sequence[Task],
    embedder: Embedder,
    difficulties: Optional[Mapping[str, float]] = None,
) -> List[CacheEntry]:
    """Ein CacheEntry je Aufgabe mit Embedding, Technik-Mitteln und Baseline-Kosten.

    Aufgaben ohne Baseline-Kosten oder ohne Embedding werden mit Warnung ausgelassen.
    """
    records = cache.all_records() if isinstance(cache, RunCache) else cache
    if difficulties is None and isinstance(cache, RunCache):
        difficulties = cache.pilot_difficulties()
    difficulties = difficulties or {}
    outcomes = aggregate_outcomes(records)

    candidates = []
    for task in tasks:
        per_technique = outcomes.get(task.id)
        if not per_technique:
            logger.warning(f"Task {task.id} ohne Records, ausgelassen")
            continue
        baseline = per_technique.get(BASELINE)
        if baseline is None or baseline.cost <= 0:
            logger.warning(f"Task {task.id} ohne positive Baseline-Kosten, ausgelassen")
            continue
        candidates.append((task, per_technique, baseline.cost))

    entries = []
    for task, per_technique, baseline_cost in candidates:
        try:
            embedding = embedder.embed([task.prompt])[0]
        except ReliabilityError as e:
            logger.warning(f"Embedding für {task.id} fehlgeschlagen, ausgelassen: {e}")
            continue
        entries.append(
            CacheEntry(
                task_id=task.id,
                embedding=embedding,
                category=task.category.value,
                per_technique=per_technique,
                baseline_cost=baseline_cost,
                difficulty=difficulties.get(task.id),
                prompt=task.prompt,
            )
        )
    logger.info(f"Router-Cache: {len(entries)} von {len(tasks)} Tasks")
    return entries


def save_router_cache(entries: Sequence[CacheEntry], path: Union[str, Path]) -> None:
    """Eine JSON-Zeile je Eintrag, Schlüssel sortiert."""
    lines = [json.dumps(json.loads(e.json()), sort_keys=True) for e in entries]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_router_cache(path: Union[str, Path]) -> List[CacheEntry]:
    entries = []
    try:
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                entries.append(CacheEntry.parse_obj(json.loads(line)))
    except (OSError, ValueError) as e:
        raise ConfigValidationError(f"Router-Cache {path} nicht lesbar: {e}") from e
    return entries
