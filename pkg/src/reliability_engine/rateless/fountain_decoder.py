"""Fountain-Decoder: Stichproben ziehen bis zur Konfidenz, dann ML-Decodierung.

Decodierung: Fast-Path bei klarer Dominanz des Besten, sonst Erasure-Marking
und gewichtete Synthese über das verbleibende Qualitätsband.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence

from ..channel.channel import ChannelLike, get_channel, intrinsic_confidence
from ..core.context import RunRecorder, TechniqueContext
from ..core.run_models import RunRecord, TaskLike
from ..diversity.diversity_combiner import best_index, mrc_weights, require_logprobs
from ..diversity.diversity_models import BranchResult
from ..exceptions import AllBranchesFailedError, ChannelTransportError, ConfigValidationError
from .rateless_models import FountainState, StopReason

logger = logging.getLogger(__name__)

MEAN_WEIGHT = 0.6
AGREEMENT_WEIGHT = 0.4
DOMINANCE_GAP = 0.20
ERASURE_GAP = 0.10
SOFT_ERASURE_RATIO = 0.5
SYNTHESIS_TEMPERATURE = 0.1


def fountain_confidence(values: Sequence[float]) -> float:
    """γ_n = 0.6 · Mittelwert + 0.4 · (1 − Spannweite der oberen ⌈n/2⌉ Werte)."""
    if not values:
        raise ConfigValidationError("Konfidenz braucht mindestens einen Wert")
    top = sorted(values, reverse=True)[: math.ceil(len(values) / 2)]
    agreement = 1.0 - (max(top) - min(top))
    return MEAN_WEIGHT * math.fsum(values) / len(values) + AGREEMENT_WEIGHT * agreement


def sample_temperature(n: int) -> float:
    """Temperatur der n-ten Stichprobe (1-basiert)."""
    return round(0.5 + 0.1 * (n % 5), 10)


def _validate(n_min: int, n_max: int, gamma: float) -> None:
    if not 1 <= n_min <= n_max:
        raise ConfigValidationError(f"Erwartet 1 <= n_min <= n_max, war {n_min}/{n_max}")
    if not 0.0 <= gamma <= 1.0:
        raise ConfigValidationError(f"gamma muss in [0,1] liegen, war {gamma}")


def _draw(
    context: TechniqueContext,
    recorder: RunRecorder,
    channels: Sequence[ChannelLike],
    n_max: int,
    n_min: int,
    gamma: float,
    soft: bool,
) -> FountainState:
    pool = context.channels(channels)
    if soft:
        require_logprobs(pool)
    state = FountainState()
    failures: List[Exception] = []
    for n in range(1, n_max + 1):
        channel_index = (n - 1) % len(pool)
        try:
            output = pool[channel_index].generate(
                recorder.task.prompt, sample_temperature(n), want_logprobs=soft
            )
        except ChannelTransportError as e:
            logger.warning(f"Fountain: Stichprobe {n} fehlgeschlagen: {e}")
            recorder.flag("branch_failed")
            failures.append(e)
            continue
        recorder.add_individual(output)
        branch = BranchResult(output=output, channel_index=channel_index, sample_index=n - 1)
        if soft:
            branch.confidence = intrinsic_confidence(output)
        else:
            branch.score = recorder.add_score(
                context.scorer.score(recorder.task, output.text), individual=True
            )
        state.samples.append(branch)

        if len(state.samples) >= n_min:
            values = [b.confidence if soft else b.quality for b in state.samples]
            state.record(min(1.0, max(0.0, fountain_confidence(values))))
            if state.confidence >= gamma:
                state.stopped_reason = StopReason.THRESHOLD
                break
    if not state.samples:
        raise AllBranchesFailedError(f"Alle {n_max} Stichproben fehlgeschlagen", failures)
    return state


def _decode(
    context: TechniqueContext,
    recorder: RunRecorder,
    state: FountainState,
    values: List[float],
    erased: Callable[[float, float], bool],
    synthesizer: ChannelLike,
) -> RunRecord:
    samples = state.samples
    recorder.metadata.update(
        {
            "samples": len(samples),
            "confidence": state.confidence,
            "confidence_history": state.confidence_history,
            "stopped_reason": state.stopped_reason.value,
        }
    )
    best_pos = best_index(values)
    best = samples[best_pos]
    if best.score is None:
        best.score = recorder.add_score(context.scorer.score(recorder.task, best.text), individual=True)

    if len(samples) == 1:
        return recorder.finish(best.text, best.quality, rounds=1)

    runner_up = sorted(values, reverse=True)[1]
    if round(values[best_pos] - runner_up, 9) > DOMINANCE_GAP:
        recorder.flag("dominance_fast_path")
        return recorder.finish(best.text, best.quality, rounds=len(samples))

    survivors = [i for i, v in enumerate(values) if i == best_pos or not erased(values[best_pos], v)]
    recorder.metadata["erased"] = [i for i in range(len(samples)) if i not in survivors]
    if len(survivors) == 1:
        recorder.flag("all_erased")
        return recorder.finish(best.text, best.quality, rounds=len(samples))

    weights = mrc_weights([values[i] for i in survivors])
    blocks = "\n\n".join(
        f"[SAMPLE-{n + 1}] (weight {w:.3f})\n{samples[i].text}"
        for n, (i, w) in enumerate(zip(survivors, weights))
    )
    prompt = context.prompts.render("fountain_synthesis", task=recorder.task.prompt, samples=blocks)
    try:
        synthesis = recorder.add_overhead(get_channel(synthesizer).generate(prompt, SYNTHESIS_TEMPERATURE))
    except ChannelTransportError as e:
        logger.warning(f"Fountain-Synthese fehlgeschlagen: {e}")
        recorder.flag("synthesis_failed")
        return recorder.finish(best.text, best.quality, rounds=len(samples))

    score = recorder.add_score(context.scorer.score(recorder.task, synthesis.text))
    recorder.metadata["synthesis_quality"] = score.value
    if score.value > best.quality:
        return recorder.finish(synthesis.text, score.value, rounds=len(samples))
    recorder.flag("best_of_sequence_revert")
    return recorder.finish(best.text, best.quality, rounds=len(samples))


def run_fountain(
    channels: Sequence[ChannelLike],
    task: TaskLike,
    n_max: int = 10,
    n_min: int = 2,
    gamma: float = 0.85,
    synthesizer: Optional[ChannelLike] = None,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Rateless Sampling mit Judge-Scores.

    Args:
        channels: Kanal-Pool, Stichprobe n kommt von Kanal (n−1) mod d
        task: Aufgabe
        n_max: Obergrenze der Stichproben
        n_min: Frühester Stopp-Zeitpunkt
        gamma: Stopp-Schwelle der Konfidenz
        synthesizer: Synthese-Kanal, Default der erste Kanal
        context: Technik-Kontext
    """
    _validate(n_min, n_max, gamma)
    recorder = RunRecorder(task, "fountain")
    state = _draw(context, recorder, channels, n_max, n_min, gamma, soft=False)
    return _decode(
        context,
        recorder,
        state,
        [b.quality for b in state.samples],
        lambda best, value: round(best - value, 9) > ERASURE_GAP,
        synthesizer if synthesizer is not None else channels[0],
    )


def run_soft_fountain(
    channels: Sequence[ChannelLike],
    task: TaskLike,
    n_max: int = 10,
    n_min: int = 2,
    gamma: float = 0.85,
    synthesizer: Optional[ChannelLike] = None,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Fountain mit intrinsischer Konfidenz statt Judge-Scores.

    Nur die konfidenteste Stichprobe und die Synthese werden bewertet;
    gelöscht wird bei c < 0.5 · c_max.
    """
    _validate(n_min, n_max, gamma)
    recorder = RunRecorder(task, "soft_fountain")
    state = _draw(context, recorder, channels, n_max, n_min, gamma, soft=True)
    return _decode(
        context,
        recorder,
        state,
        [b.confidence or 0.0 for b in state.samples],
        lambda best, value: value < SOFT_ERASURE_RATIO * best,
        synthesizer if synthesizer is not None else channels[0],
    )


__all__ = ["fountain_confidence", "run_fountain", "run_soft_fountain", "sample_temperature"]
