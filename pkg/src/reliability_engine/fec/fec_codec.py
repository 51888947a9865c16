"""Strukturierte FEC mit Syndrom-Decoder sowie Chain-of-Verification als Vergleich."""

import functools
import logging
import math
import re
from typing import List, Optional

from ..channel.channel import ChannelLike, get_channel
from ..core.context import RunRecorder, TechniqueContext
from ..core.run_models import RunRecord, TaskLike
from ..exceptions import ChannelTransportError, ConfigValidationError
from .fec_models import CODE_RATES, ParityKind, ParitySection

logger = logging.getLogger(__name__)

DECODER_TEMPERATURE = 0.2
MAX_VERIFICATION_QUESTIONS = 5
_LIST_PREFIX = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


def parity_plan(rate: float) -> List[ParityKind]:
    """Paritätsabschnitte für eine Coderate aus {1.0, 0.75, 0.5, 0.33, 0.25}."""
    for known, plan in CODE_RATES.items():
        if math.isclose(rate, known, abs_tol=1e-9):
            return list(plan)
    raise ConfigValidationError(
        f"Unbekannte Coderate {rate}; erlaubt: {', '.join(str(r) for r in CODE_RATES)}"
    )


def _parity_prompt(context: TechniqueContext, kind: ParityKind, task: str, answer: str) -> str:
    try:
        instruction = context.prompts.parity_instructions[kind.value]
    except KeyError:
        raise ConfigValidationError(f"Keine Paritäts-Instruktion für {kind.value}")
    main = context.prompts.render("parity_main_context", task=task, answer=answer)
    return f"{instruction.strip()}\n\n{main}"


def run_fec(
    channel: ChannelLike,
    task: TaskLike,
    rate: float = 0.5,
    decoder: Optional[ChannelLike] = None,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Hauptantwort, je Paritätsart ein eigener Aufruf, dann Syndrom-Decodierung.

    Args:
        channel: Generator für Hauptantwort und Paritätsabschnitte
        task: Aufgabe
        rate: Coderate; 1.0 ist uncodiert
        decoder: Decoder-Kanal, Default der Generator
        context: Technik-Kontext

    Returns:
        RunRecord; die decodierte Antwort nur, wenn sie die Hauptantwort schlägt
    """
    plan = parity_plan(rate)
    gen = get_channel(channel)
    recorder = RunRecorder(task, "fec")
    recorder.metadata["rate"] = rate
    main = recorder.add_individual(gen.generate(recorder.task.prompt))
    main_score = recorder.add_score(context.scorer.score(recorder.task, main.text), individual=True)
    if not plan:
        return recorder.finish(main.text, main_score.value, rounds=1)

    calls = [
        functools.partial(gen.generate, _parity_prompt(context, kind, recorder.task.prompt, main.text))
        for kind in plan
    ]
    sections: List[ParitySection] = []
    for kind, result in zip(plan, context.fan_out(calls, parallel=gen.supports_parallel)):
        if isinstance(result, ChannelTransportError):
            logger.warning(f"FEC: Paritätsabschnitt {kind.value} fehlgeschlagen: {result}")
            recorder.flag("parity_failed")
            continue
        recorder.add_individual(result)
        sections.append(ParitySection(kind=kind, text=result.text, output=result))
    recorder.metadata["parity"] = [s.kind.value for s in sections]
    if not sections:
        return recorder.finish(main.text, main_score.value, rounds=1)

    blocks = [f"[1] MAIN ANSWER\n{main.text}"] + [
        f"[{n}] {s.kind.value.upper()}\n{s.text}" for n, s in enumerate(sections, start=2)
    ]
    checks = "\n".join(context.prompts.decoder_checks.get(s.kind.value, "") for s in sections)
    prompt = context.prompts.render(
        "syndrome_decoder", checks=checks, task=recorder.task.prompt, blocks="\n\n".join(blocks)
    )
    dec = get_channel(decoder) if decoder is not None else gen
    try:
        decoded = recorder.add_overhead(dec.generate(prompt, DECODER_TEMPERATURE))
    except ChannelTransportError as e:
        logger.warning(f"FEC: Decoder fehlgeschlagen, Hauptantwort wird geliefert: {e}")
        recorder.flag("decoder_failed")
        return recorder.finish(main.text, main_score.value, rounds=1)

    score = recorder.add_score(
        context.scorer.differential_score(recorder.task, decoded.text, main.text, main_score.value)
    )
    recorder.metadata["decoded_quality"] = score.value
    if score.value > main_score.value:
        return recorder.finish(decoded.text, score.value, rounds=1)
    recorder.flag("best_of_sequence_revert")
    return recorder.finish(main.text, main_score.value, rounds=1)


def _questions(text: str) -> List[str]:
    lines = (_LIST_PREFIX.sub("", line).strip() for line in text.splitlines())
    return [line for line in lines if line][:MAX_VERIFICATION_QUESTIONS]


def run_chain_of_verification(
    channel: ChannelLike, task: TaskLike, *, context: TechniqueContext
) -> RunRecord:
    """Entwurf, Prüffragen, unabhängige Antworten, verifizierte Endfassung; ohne Guard."""
    gen = get_channel(channel)
    recorder = RunRecorder(task, "chain_of_verification")
    prompt = recorder.task.prompt
    draft = recorder.add_individual(gen.generate(prompt)).text

    plan = recorder.add_overhead(
        gen.generate(context.prompts.render("cove_plan", task=prompt, answer=draft))
    )
    questions = _questions(plan.text)
    if not questions:
        logger.warning("CoVe: keine Prüffragen erhalten, Entwurf wird geliefert")
        recorder.flag("no_verification_questions")
        score = recorder.add_score(context.scorer.score(recorder.task, draft), individual=True)
        return recorder.finish(draft, score.value, rounds=1)

    calls = [
        functools.partial(gen.generate, context.prompts.render("cove_answer", question=q))
        for q in questions
    ]
    answers = []
    for question, result in zip(questions, context.fan_out(calls, parallel=gen.supports_parallel)):
        if isinstance(result, ChannelTransportError):
            recorder.flag("verification_failed")
            continue
        recorder.add_overhead(result)
        answers.append(f"Q: {question}\nA: {result.text}")

    final = recorder.add_individual(
        gen.generate(
            context.prompts.render(
                "cove_final", task=prompt, answer=draft, verification="\n\n".join(answers) or "(none)"
            )
        )
    )
    score = recorder.add_score(context.scorer.score(recorder.task, final.text), individual=True)
    recorder.metadata["questions"] = len(questions)
    return recorder.finish(final.text, score.value, rounds=1)


__all__ = ["parity_plan", "run_chain_of_verification", "run_fec"]
