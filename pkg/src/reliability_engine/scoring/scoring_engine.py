"""Scoring Engine: gewichteter Checklisten-Judge, Blended- und Differential-Scoring."""

import logging
import math
import re
from importlib import resources
from typing import Dict, List, Optional, Tuple

import yaml

from ..channel.channel import ChannelLike, get_channel
from ..channel.channel_models import AgentOutput
from ..channel.synthetic_backend import SyntheticBackend, read_quality_marker
from ..core.prompts import PromptLibrary
from ..core.run_models import ObjectiveCheck, Task, TaskLike
from ..exceptions import ChannelTransportError, ConfigValidationError
from .score_models import (
    Checklist,
    ChecklistCriterion,
    ChecklistSet,
    ChecklistVariant,
    QualityScore,
    ScoreKind,
)

logger = logging.getLogger(__name__)

OBJECTIVE_WEIGHT = 0.6
JUDGE_WEIGHT = 0.4
JUDGE_TEMPERATURE = 0.0

_ANSWER_LINE = re.compile(
    r"^\s*(?:[-*•]\s*)?(?:\(?\d+[.):\]]\s*)?\[?([A-Za-z0-9_.\-]+)\]?\s*[:=\-]\s*\**"
    r"(yes|no|y|n|true|false)\b",
    re.IGNORECASE,
)
_YES = {"yes", "y", "true"}


def load_default_checklists() -> ChecklistSet:
    """Lädt die mitgelieferten Standard-Checklisten."""
    text = (
        resources.files("reliability_engine.scoring")
        .joinpath("checklists")
        .joinpath("default_checklists.yaml")
        .read_text(encoding="utf-8")
    )
    return checklists_from_data(yaml.safe_load(text))


def checklists_from_data(data: Dict) -> ChecklistSet:
    """Baut ein ChecklistSet aus ``{with_reference: [...], without_reference: [...]}``."""
    try:
        return ChecklistSet(
            with_reference=Checklist(
                variant=ChecklistVariant.WITH_REFERENCE,
                criteria=[ChecklistCriterion(**c) for c in data["with_reference"]],
            ),
            without_reference=Checklist(
                variant=ChecklistVariant.WITHOUT_REFERENCE,
                criteria=[ChecklistCriterion(**c) for c in data["without_reference"]],
            ),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigValidationError(f"Ungültige Checklisten-Definition: {e}") from e


def parse_judge_reply(reply: str, checklist: Checklist) -> Dict[str, bool]:
    """Liest ``id: yes|no``-Zeilen; unbekannte IDs werden ignoriert."""
    known = {c.id.lower(): c.id for c in checklist.criteria}
    answers: Dict[str, bool] = {}
    for line in reply.splitlines():
        match = _ANSWER_LINE.match(line)
        if not match:
            continue
        criterion_id = known.get(match.group(1).lower())
        if criterion_id and criterion_id not in answers:
            answers[criterion_id] = match.group(2).lower() in _YES
    return answers


def weighted_sum(checklist: Checklist, answers: Dict[str, bool]) -> float:
    return math.fsum(c.weight for c in checklist.criteria if answers.get(c.id, False))


def blended_score(objective: float, judge: float) -> QualityScore:
    """q = 0.6 · q_obj + 0.4 · q_judge."""
    for name, value in (("objective", objective), ("judge", judge)):
        if not 0.0 <= value <= 1.0:
            raise ConfigValidationError(f"{name} muss in [0,1] liegen, war {value}")
    return QualityScore(
        value=OBJECTIVE_WEIGHT * objective + JUDGE_WEIGHT * judge,
        kind=ScoreKind.BLENDED,
        components={"objective": objective, "judge": judge},
    )


def objective_score(candidate: str, checks: List[ObjectiveCheck]) -> float:
    """Gewichteter Anteil bestandener Regex-Prüfungen."""
    if not checks:
        raise ConfigValidationError("Keine objektiven Prüfungen definiert")
    passed = math.fsum(
        c.weight for c in checks if re.search(c.pattern, candidate, re.IGNORECASE | re.MULTILINE)
    )
    return passed / math.fsum(c.weight for c in checks)


class ScoringEngine:
    """Kanalschätzer: bewertet Kandidaten mit einem Judge-Kanal."""

    def __init__(
        self,
        judge: ChannelLike,
        checklists: Optional[ChecklistSet] = None,
        prompts: Optional[PromptLibrary] = None,
    ) -> None:
        self.judge = get_channel(judge)
        self.checklists = checklists or load_default_checklists()
        self.prompts = prompts or PromptLibrary()

    def _synthetic_judgement(self, candidate: str) -> Tuple[float, AgentOutput, bool]:
        value = read_quality_marker(candidate)
        backend = self.judge.backend
        cost = backend.spec.cost_per_call if isinstance(backend, SyntheticBackend) else 0.0
        output = AgentOutput(
            text=f"marker={value}",
            model_id=self.judge.config.model_id,
            temperature=JUDGE_TEMPERATURE,
            prompt_tokens=len(candidate.split()),
            completion_tokens=1,
            cost_usd=cost,
        )
        if value is None:
            logger.warning("Synthetischer Judge: kein Qualitätsmarker im Kandidaten")
            return 0.0, output, True
        return value, output, False

    def _render(self, template: str, task: str, candidate: str, reference: Optional[str],
                criteria: List[ChecklistCriterion]) -> str:
        reference_block = (
            self.prompts.render("reference_block", reference=reference) if reference else ""
        )
        return self.prompts.render(
            template,
            task=task,
            candidate=candidate,
            reference_block=reference_block,
            criteria="\n".join(f"{c.id}: {c.question}" for c in criteria),
        )

    def checklist_score(
        self, task: str, candidate: str, reference: Optional[str] = None
    ) -> QualityScore:
        """Gewichtete Checkliste: Σ weight_i · [answer_i = yes].

        Args:
            task: Aufgabentext
            candidate: Zu bewertende Antwort (nicht leer)
            reference: Optionale Referenzantwort (wählt die Checklisten-Variante)

        Returns:
            QualityScore vom Typ checklist (bzw. synthetic-oracle beim Simulator)
        """
        if not candidate or not candidate.strip():
            raise ConfigValidationError("Kandidat darf nicht leer sein")

        if self.judge.is_synthetic:
            value, output, degraded = self._synthetic_judgement(candidate)
            return QualityScore(
                value=value,
                kind=ScoreKind.SYNTHETIC_ORACLE,
                degraded=degraded,
                judge_outputs=[output],
            )

        checklist = self.checklists.for_reference(bool(reference))
        outputs: List[AgentOutput] = []
        prompt = self._render("judge_checklist", task, candidate, reference, checklist.criteria)
        reply = self.judge.generate(prompt, temperature=JUDGE_TEMPERATURE)
        outputs.append(reply)
        answers = parse_judge_reply(reply.text, checklist)

        missing = [c for c in checklist.criteria if c.id not in answers]
        degraded = False
        if missing:
            logger.warning(f"Judge-Antwort unvollständig ({len(missing)} offen), Nachfrage")
            try:
                reask = self._render("judge_reask", task, candidate, reference, missing)
                retry = self.judge.generate(reask, temperature=JUDGE_TEMPERATURE)
                outputs.append(retry)
                for key, value in parse_judge_reply(retry.text, checklist).items():
                    answers.setdefault(key, value)
            except ChannelTransportError as e:
                logger.warning(f"Nachfrage beim Judge fehlgeschlagen: {e}")
            still_missing = [c.id for c in checklist.criteria if c.id not in answers]
            if still_missing:
                logger.warning(f"{len(still_missing)} Kriterien als 'nein' gewertet")
                degraded = True
                for criterion_id in still_missing:
                    answers[criterion_id] = False

        return QualityScore(
            value=weighted_sum(checklist, answers),
            kind=ScoreKind.CHECKLIST,
            answers=answers,
            degraded=degraded,
            judge_outputs=outputs,
        )

    def score(self, task: TaskLike, candidate: str) -> QualityScore:
        """Checkliste, bzw. Blend mit objektiven Prüfungen wenn die Aufgabe welche hat."""
        task = Task.coerce(task)
        judged = self.checklist_score(task.prompt, candidate, task.reference)
        if not task.objective_checks:
            return judged
        blended = blended_score(objective_score(candidate, task.objective_checks), judged.value)
        blended.degraded = judged.degraded
        blended.judge_outputs = judged.judge_outputs
        return blended

    def differential_score(
        self,
        task: TaskLike,
        candidate: str,
        baseline: str,
        baseline_score: float,
    ) -> QualityScore:
        """Differentielle Bewertung: q0 + (q(candidate) − q(baseline)), auf [0,1] begrenzt.

        Beide Texte werden mit demselben Aufrufmuster bewertet, sodass sich
        Gleichtaktrauschen des Judges weghebt.
        """
        if not 0.0 <= baseline_score <= 1.0:
            raise ConfigValidationError(f"baseline_score muss in [0,1] liegen: {baseline_score}")
        if candidate.strip() == baseline.strip():
            return QualityScore(
                value=baseline_score,
                kind=ScoreKind.DIFFERENTIAL,
                components={"candidate": baseline_score, "baseline": baseline_score},
            )
        cand = self.score(task, candidate)
        base = self.score(task, baseline)
        return QualityScore(
            value=baseline_score + (cand.value - base.value),
            kind=ScoreKind.DIFFERENTIAL,
            components={"candidate": cand.value, "baseline": base.value},
            degraded=cand.degraded or base.degraded,
            judge_outputs=cand.judge_outputs + base.judge_outputs,
        )


def checklist_score(
    judge_channel: ChannelLike,
    task: str,
    candidate: str,
    reference: Optional[str] = None,
) -> QualityScore:
    """Funktionale Variante von :meth:`ScoringEngine.checklist_score`."""
    return ScoringEngine(judge_channel).checklist_score(task, candidate, reference)


def differential_score(
    judge_channel: ChannelLike,
    task: TaskLike,
    candidate: str,
    baseline: str,
    baseline_score: float,
) -> QualityScore:
    """Funktionale Variante von :meth:`ScoringEngine.differential_score`."""
    return ScoringEngine(judge_channel).differential_score(task, candidate, baseline, baseline_score)


__all__ = [
    "ScoringEngine",
    "blended_score",
    "checklist_score",
    "checklists_from_data",
    "differential_score",
    "load_default_checklists",
    "objective_score",
    "parse_judge_reply",
]
