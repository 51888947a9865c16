"""Iterative Decoder über den Rückkanal: HARQ-CC, HARQ-IR, Turbo und Self-Refine.

Alle geführten Decoder halten einen Best-of-Sequence-Zustand; ein Kandidat
ersetzt den besten nur, wenn sein differentieller Score mindestens gleich
hoch ist. Self-Refine liefert als Vergleichsverfahren die letzte Iteration.
"""

import logging
from typing import List, Optional

from ..channel.channel import Channel, ChannelLike, get_channel
from ..core.context import RunRecorder, TechniqueContext
from ..core.run_models import RunRecord, TaskLike
from ..exceptions import ChannelTransportError, ConfigValidationError
from .critique_parser import (
    drop_applied,
    format_corrections,
    normalize_quote,
    parse_critique,
    scale_extrinsic,
)
from .retransmit_models import ALPHA_MIN, CritiqueIssue, IterationState, Severity

logger = logging.getLogger(__name__)

CHASE_TEMPERATURE = 0.3
CRITIC_TEMPERATURE = 0.2
EARLY_EXIT_FRACTION = 0.9
PLATEAU_WINDOW = 2
PLATEAU_SPREAD = 0.015
DIVERGENCE_LIMIT = 2
ALPHA_RELAX = 1.2
ALPHA_DAMP = 0.5


def _initial(
    context: TechniqueContext, recorder: RunRecorder, generator: Channel
) -> IterationState:
    output = recorder.add_individual(generator.generate(recorder.task.prompt))
    score = recorder.add_score(context.scorer.score(recorder.task, output.text), individual=True)
    return IterationState.start(output.text, score.value)


def _critique(
    context: TechniqueContext,
    recorder: RunRecorder,
    critic: Channel,
    state: IterationState,
    lens: Optional[str] = None,
) -> List[CritiqueIssue]:
    dedup = "\n".join(f'- "{q}"' for q in sorted(state.applied_corrections)) or "(none)"
    prompt = context.prompts.render(
        "critic",
        dedup=dedup,
        lens_instruction=context.prompts.render("lens_instruction", lens=lens) if lens else "",
        task=recorder.task.prompt,
        answer=state.best_text,
    )
    try:
        reply = recorder.add_overhead(critic.generate(prompt, CRITIC_TEMPERATURE))
    except ChannelTransportError as e:
        logger.warning(f"Kritiker fehlgeschlagen, leere Befundliste: {e}")
        recorder.flag("critic_failed")
        return []
    issues = drop_applied(parse_critique(reply.text), state.applied_corrections)
    if any(not i.structured for i in issues):
        recorder.flag("unstructured_critique")
    return issues


def _refine_prompt(context: TechniqueContext, recorder: RunRecorder, answer: str,
                   issues: List[CritiqueIssue]) -> str:
    structured = [i for i in issues if i.structured]
    if structured:
        return context.prompts.render(
            "correction_list",
            task=recorder.task.prompt,
            answer=answer,
            corrections=format_corrections(structured),
        )
    if issues:
        feedback = "\n".join(i.fix for i in issues)
    else:
        feedback = context.prompts.render("polish_feedback")
    return context.prompts.render(
        "full_rewrite", task=recorder.task.prompt, answer=answer, feedback=feedback
    )


def _refine(
    context: TechniqueContext,
    recorder: RunRecorder,
    generator: Channel,
    state: IterationState,
    issues: List[CritiqueIssue],
) -> Optional[bool]:
    """Ein Generator-Durchlauf mit differentieller Bewertung; None bei Transportfehler."""
    prompt = _refine_prompt(context, recorder, state.best_text, issues)
    try:
        output = recorder.add_individual(generator.generate(prompt))
    except ChannelTransportError as e:
        logger.warning(f"Verfeinerung fehlgeschlagen: {e}")
        recorder.flag("refinement_failed")
        return None
    score = recorder.add_score(
        context.scorer.differential_score(
            recorder.task, output.text, state.best_text, state.best_score
        )
    )
    quotes = [normalize_quote(i.quote) for i in issues if i.structured]
    accepted = state.offer(output.text, score.value, quotes)
    if not accepted:
        logger.debug(f"Kandidat {score.value:.4f} < bestem {state.best_score:.4f}, verworfen")
    return accepted


def _finish(recorder: RunRecorder, state: IterationState, stop_reason: str) -> RunRecord:
    recorder.metadata.update(
        {"score_history": state.score_history, "accepted": state.accepted, "stop_reason": stop_reason}
    )
    return recorder.finish(state.best_text, state.best_score, rounds=len(state.score_history))


def run_harq_cc(
    channel: ChannelLike,
    task: TaskLike,
    max_rounds: int = 5,
    tau: float = 0.85,
    synthesizer: Optional[ChannelLike] = None,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Chase Combining: bis zu K identische Übertragungen, dann Chase-Synthese.

    Args:
        channel: Generator (derselbe Prompt an denselben Kanal)
        task: Aufgabe
        max_rounds: K, Anzahl Übertragungen
        tau: Frühstopp-Schwelle
        synthesizer: Chase-Synthesizer, Default der Generator
        context: Technik-Kontext

    Returns:
        RunRecord mit bestem Versuch oder geschützter Synthese
    """
    if max_rounds < 1:
        raise ConfigValidationError("max_rounds muss >= 1 sein")
    generator = get_channel(channel)
    recorder = RunRecorder(task, "harq_cc")
    attempts: List[tuple] = []

    for k in range(max_rounds):
        try:
            output = recorder.add_individual(generator.generate(recorder.task.prompt))
        except ChannelTransportError as e:
            if not attempts:
                logger.error(f"HARQ-CC: erste Übertragung fehlgeschlagen: {e}")
                raise
            logger.warning(f"HARQ-CC: Runde {k + 1} fehlgeschlagen, weiter mit {len(attempts)}")
            recorder.flag("round_failed")
            break
        score = recorder.add_score(context.scorer.score(recorder.task, output.text), individual=True)
        attempts.append((output.text, score.value))
        if score.value >= tau:
            logger.debug(f"HARQ-CC: Schwelle in Runde {k + 1} erreicht")
            recorder.metadata["stop_reason"] = "threshold"
            return recorder.finish(output.text, score.value, rounds=len(attempts))

    best_text, best_score = max(attempts, key=lambda a: a[1])
    recorder.metadata["stop_reason"] = "max_rounds"
    if len(attempts) == 1:
        return recorder.finish(best_text, best_score, rounds=1)

    blocks = "\n\n".join(
        f"[ATTEMPT-{i + 1}] (score {s:.3f})\n{t}" for i, (t, s) in enumerate(attempts)
    )
    prompt = context.prompts.render("chase_synthesis", task=recorder.task.prompt, attempts=blocks)
    combiner = get_channel(synthesizer) if synthesizer is not None else generator
    try:
        synthesis = recorder.add_overhead(combiner.generate(prompt, CHASE_TEMPERATURE))
    except ChannelTransportError as e:
        logger.warning(f"Chase-Synthese fehlgeschlagen: {e}")
        recorder.flag("synthesis_failed")
        return recorder.finish(best_text, best_score, rounds=len(attempts))

    score = recorder.add_score(
        context.scorer.differential_score(recorder.task, synthesis.text, best_text, best_score)
    )
    if score.value > best_score:
        return recorder.finish(synthesis.text, score.value, rounds=len(attempts))
    recorder.flag("best_of_sequence_revert")
    return recorder.finish(best_text, best_score, rounds=len(attempts))


def run_harq_ir(
    generator: ChannelLike,
    critic: Optional[ChannelLike],
    task: TaskLike,
    max_rounds: int = 5,
    tau: float = 0.85,
    early_exit: bool = False,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Incremental Redundancy: strukturierte Kritik als neue Parität je Runde.

    ``max_rounds`` zählt die Erstgenerierung mit. Ohne ``early_exit`` laufen alle
    Runden bis zur Schwelle τ; leere Befundlisten führen dann zu einem Polier-Rewrite.
    """
    if max_rounds < 1:
        raise ConfigValidationError("max_rounds muss >= 1 sein")
    gen = get_channel(generator)
    crit = get_channel(critic) if critic is not None else gen
    recorder = RunRecorder(task, "harq_ir")
    state = _initial(context, recorder, gen)
    if state.best_score >= tau:
        return _finish(recorder, state, "threshold")

    stop_reason = "max_rounds"
    for _ in range(2, max_rounds + 1):
        issues = _critique(context, recorder, crit, state)
        if early_exit:
            if not issues and state.best_score >= EARLY_EXIT_FRACTION * tau:
                stop_reason = "early_exit"
                break
            if state.plateaued(PLATEAU_WINDOW, PLATEAU_SPREAD):
                stop_reason = "plateau"
                break
        if _refine(context, recorder, gen, state, issues) is None:
            continue
        if state.best_score >= tau:
            stop_reason = "threshold"
            break
    return _finish(recorder, state, stop_reason)


def run_turbo(
    generator: ChannelLike,
    critic: Optional[ChannelLike],
    task: TaskLike,
    max_iterations: int = 5,
    tau: float = 0.9,
    alpha0: float = 0.5,
    severity_floor: Severity = Severity.MAJOR,
    max_corrections: int = 2,
    early_exit: bool = False,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Turbo-Decoder mit Linsen-Rotation, Extrinsic-Scaling und adaptiver Dämpfung.

    Iteration 0 ist die Erstgenerierung; danach höchstens ``max_iterations``
    Verfeinerungen. Die Divergenz-Abbruchbedingung (zwei Rückschritte in Folge)
    gilt immer, die Plateau-Erkennung nur mit ``early_exit``.
    """
    if max_iterations < 1:
        raise ConfigValidationError("max_iterations muss >= 1 sein")
    if not ALPHA_MIN <= alpha0 <= 1:
        raise ConfigValidationError(f"alpha0 muss in [{ALPHA_MIN}, 1] liegen")
    severity_floor = Severity(severity_floor)
    gen = get_channel(generator)
    crit = get_channel(critic) if critic is not None else gen
    lenses = context.prompts.turbo_lenses
    if not lenses:
        raise ConfigValidationError("Prompt-Bibliothek enthält keine Turbo-Linsen")

    recorder = RunRecorder(task, "turbo")
    state = _initial(context, recorder, gen)
    state.alpha = alpha0
    if state.best_score >= tau:
        return _finish(recorder, state, "threshold")

    alphas = [state.alpha]
    stop_reason = "max_iterations"
    for k in range(1, max_iterations + 1):
        lens = lenses[k % len(lenses)]
        issues = _critique(context, recorder, crit, state, lens=lens)
        corrections = scale_extrinsic(issues, state.alpha, severity_floor, max_corrections)
        if not corrections:
            recorder.flag("no_corrections")
            logger.debug(f"Turbo k={k}: keine Korrektur übrig ({len(issues)} Befunde)")
        else:
            accepted = _refine(context, recorder, gen, state, corrections)
            if accepted is True:
                state.alpha = min(alpha0, ALPHA_RELAX * state.alpha)
            elif accepted is False:
                state.alpha = max(ALPHA_MIN, ALPHA_DAMP * state.alpha)
            alphas.append(state.alpha)
            if state.consecutive_regressions >= DIVERGENCE_LIMIT:
                stop_reason = "divergence"
                break
        if state.best_score >= tau:
            stop_reason = "threshold"
            break
        if early_exit and state.plateaued(PLATEAU_WINDOW, PLATEAU_SPREAD):
            stop_reason = "plateau"
            break

    recorder.metadata["alpha_history"] = alphas
    return _finish(recorder, state, stop_reason)


def run_self_refine(
    channel: ChannelLike, task: TaskLike, rounds: int = 3, *, context: TechniqueContext
) -> RunRecord:
    """Freies Feedback und Rewrite ohne Guard; die letzte Iteration wird geliefert."""
    if rounds < 1:
        raise ConfigValidationError("rounds muss >= 1 sein")
    gen = get_channel(channel)
    recorder = RunRecorder(task, "self_refine")
    text = recorder.add_individual(gen.generate(recorder.task.prompt)).text
    history = []
    for _ in range(rounds):
        try:
            feedback = recorder.add_overhead(
                gen.generate(
                    context.prompts.render("freeform_feedback", task=recorder.task.prompt, answer=text),
                    CRITIC_TEMPERATURE,
                )
            )
            rewrite = context.prompts.render(
                "full_rewrite", task=recorder.task.prompt, answer=text, feedback=feedback.text
            )
            text = recorder.add_individual(gen.generate(rewrite)).text
        except ChannelTransportError as e:
            logger.warning(f"Self-Refine abgebrochen: {e}")
            recorder.flag("round_failed")
            break
        history.append(text)
    score = recorder.add_score(context.scorer.score(recorder.task, text), individual=True)
    recorder.metadata["iterations"] = len(history)
    return recorder.finish(text, score.value, rounds=len(history) + 1)


__all__ = ["run_harq_cc", "run_harq_ir", "run_self_refine", "run_turbo"]
