"""Diversitäts-Kombinierer: SC, EGC, MRC, SC-N, diskrete MRC und Soft-Varianten.

Erzeugung und Bewertung der Zweige laufen (wo das Backend es erlaubt)
parallel; das Kombinieren selbst ist ein deterministischer Fold über die
gesammelten BranchResults. Gleichstände gewinnt immer der kleinste Index.
"""

import functools
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

from ..channel.channel import Channel, ChannelLike, get_channel, intrinsic_confidence
from ..core.context import RunRecorder, TechniqueContext
from ..core.parsing import extract_json_array
from ..core.run_models import RunRecord, TaskLike
from ..exceptions import AllBranchesFailedError, CapabilityError, ChannelTransportError, ConfigValidationError
from .diversity_models import BranchResult, ClusterAssignment, ClusterSource, CombiningMode

logger = logging.getLogger(__name__)

MRC_SYNTHESIS_TEMPERATURE = 0.1
EGC_SYNTHESIS_TEMPERATURE = 0.2
SAMPLE_TEMPERATURE = 0.7
VOTER_TEMPERATURE = 0.0
DOMINANCE_RATIO = 0.5

BranchPlan = List[Tuple[int, Channel, Optional[float]]]


def require_logprobs(channels: Sequence[Channel]) -> None:
    """Capability-Prüfung vor jedem Aufruf."""
    missing = [c.name for c in channels if not c.config.supports_logprobs]
    if missing:
        raise CapabilityError(f"Kanäle ohne Logprob-Unterstützung: {', '.join(missing)}")


def generate_branches(
    context: TechniqueContext,
    recorder: RunRecorder,
    plan: BranchPlan,
    want_logprobs: bool = False,
    score: bool = True,
) -> List[BranchResult]:
    """Erzeugt (und bewertet) Zweige gemäß Plan; ausgefallene Zweige werden übersprungen.

    Args:
        context: Technik-Kontext
        recorder: Lauf-Protokoll, erhält alle Generator- und Judge-Ausgaben
        plan: Liste (channel_index, Kanal, Temperatur)
        want_logprobs: Logprobs anfordern (setzt confidence)
        score: Jeden Zweig mit dem Judge bewerten

    Returns:
        Erfolgreiche Zweige in Plan-Reihenfolge
    """
    task = recorder.task
    calls = [
        functools.partial(channel.generate, task.prompt, temperature, want_logprobs)
        for _, channel, temperature in plan
    ]
    outputs = context.fan_out(calls, parallel=context.parallel_ok([c for _, c, _ in plan]))

    branches: List[BranchResult] = []
    failures: List[Exception] = []
    for sample_index, ((channel_index, channel, _), output) in enumerate(zip(plan, outputs)):
        if isinstance(output, ChannelTransportError):
            logger.warning(f"Zweig {sample_index} ({channel.name}) fehlgeschlagen: {output}")
            failures.append(output)
            recorder.flag("branch_failed")
            continue
        recorder.add_individual(output)
        branches.append(
            BranchResult(
                output=output,
                channel_index=channel_index,
                sample_index=sample_index,
                confidence=intrinsic_confidence(output) if want_logprobs else None,
            )
        )
    if not branches:
        raise AllBranchesFailedError(f"Alle {len(plan)} Zweige fehlgeschlagen", failures)

    if score:
        scores = context.fan_out(
            [functools.partial(context.scorer.score, task, b.text) for b in branches],
            parallel=context.judge_parallel,
        )
        for branch, result in zip(branches, scores):
            if isinstance(result, ChannelTransportError):
                raise result
            branch.score = recorder.add_score(result, individual=True)
    return branches


def best_index(values: Sequence[float]) -> int:
    """Argmax mit Gleichstand zugunsten des kleinsten Index."""
    if not values:
        raise ConfigValidationError("Keine Werte für argmax")
    return max(range(len(values)), key=lambda i: (values[i], -i))


def mrc_weights(values: Sequence[float]) -> List[float]:
    """w_i = q_i / Σ q_j; bei Summe 0 gleichverteilt."""
    total = math.fsum(values)
    if total <= 0:
        return [1.0 / len(values)] * len(values)
    return [v / total for v in values]


def _branch_blocks(branches: List[BranchResult], csi: List[float], weights: List[float],
                   best: int, uniform: bool) -> str:
    blocks = []
    alt = 0
    for i, branch in enumerate(branches):
        if i == best and not uniform:
            tag = "[BEST]"
        else:
            alt += 1
            tag = f"[ALT-{alt}]" if not uniform else f"[RESPONSE-{i + 1}]"
        header = tag if uniform else f"{tag} (score {csi[i]:.3f}, weight {weights[i]:.3f})"
        blocks.append(f"{header}\n{branch.text}")
    return "\n\n".join(blocks)


def _finish_sc(recorder: RunRecorder, branch: BranchResult) -> RunRecord:
    return recorder.finish(branch.text, branch.quality, rounds=1)


def _synthesize_with_guard(
    context: TechniqueContext,
    recorder: RunRecorder,
    synthesizer: Channel,
    prompt: str,
    temperature: float,
    best: BranchResult,
) -> RunRecord:
    """Synthese, Identitätserkennung und Best-of-Sequence-Guard."""
    try:
        synthesis = recorder.add_overhead(synthesizer.generate(prompt, temperature))
    except ChannelTransportError as e:
        logger.warning(f"Synthese fehlgeschlagen, Rückfall auf SC: {e}")
        recorder.flag("synthesis_failed")
        return _finish_sc(recorder, best)

    if synthesis.text.strip() == best.text.strip():
        recorder.flag("synthesis_identity")
        return _finish_sc(recorder, best)

    score = recorder.add_score(
        context.scorer.differential_score(recorder.task, synthesis.text, best.text, best.quality)
    )
    recorder.metadata["synthesis_quality"] = score.value
    if score.value > best.quality:
        return recorder.finish(synthesis.text, score.value, rounds=1)
    logger.debug(f"Synthese {score.value:.4f} <= bestem Zweig {best.quality:.4f}, Rückfall")
    recorder.flag("best_of_sequence_revert")
    return _finish_sc(recorder, best)


def run_sc(
    channels: Sequence[ChannelLike], task: TaskLike, *, context: TechniqueContext
) -> RunRecord:
    """Selection Combining: Zweig mit höchstem Score."""
    pool = context.channels(channels)
    recorder = RunRecorder(task, "sc")
    branches = generate_branches(context, recorder, [(i, c, None) for i, c in enumerate(pool)])
    best = branches[best_index([b.quality for b in branches])]
    return _finish_sc(recorder, best)


def run_baseline(channel: ChannelLike, task: TaskLike, *, context: TechniqueContext) -> RunRecord:
    """Uncodierter Einzelaufruf plus Judge."""
    recorder = RunRecorder(task, "baseline")
    branches = generate_branches(context, recorder, [(0, get_channel(channel), None)])
    return _finish_sc(recorder, branches[0])


def _run_synthesis_combiner(
    channels: Sequence[ChannelLike],
    task: TaskLike,
    synthesizer: ChannelLike,
    context: TechniqueContext,
    technique: str,
    uniform: bool,
) -> RunRecord:
    pool = context.channels(channels)
    recorder = RunRecorder(task, technique)
    branches = generate_branches(context, recorder, [(i, c, None) for i, c in enumerate(pool)])
    scores = [b.quality for b in branches]
    best = best_index(scores)

    if len(branches) == 1:
        recorder.flag("single_branch")
        return _finish_sc(recorder, branches[0])

    weights = [1.0 / len(branches)] * len(branches) if uniform else mrc_weights(scores)
    recorder.metadata["weights"] = weights

    if not uniform:
        q_max = scores[best]
        if all(s < DOMINANCE_RATIO * q_max for i, s in enumerate(scores) if i != best):
            recorder.flag("dominance_fast_path")
            return _finish_sc(recorder, branches[best])

    prompt = context.prompts.render(
        "egc_synthesis" if uniform else "mrc_synthesis",
        task=recorder.task.prompt,
        branches=_branch_blocks(branches, scores, weights, best, uniform),
    )
    temperature = EGC_SYNTHESIS_TEMPERATURE if uniform else MRC_SYNTHESIS_TEMPERATURE
    return _synthesize_with_guard(
        context, recorder, get_channel(synthesizer), prompt, temperature, branches[best]
    )


def run_mrc(
    channels: Sequence[ChannelLike],
    task: TaskLike,
    synthesizer: ChannelLike,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Maximal-Ratio Combining mit Gewichten w_i = q_i/Σq und drei Guards.

    Guards in Reihenfolge: Dominanz-Fast-Path (alle anderen < 0.5·q_max),
    Identitätserkennung, Best-of-Sequence.
    """
    if len(channels) < 2:
        raise ConfigValidationError("MRC braucht mindestens zwei Kanäle")
    return _run_synthesis_combiner(channels, task, synthesizer, context, "mrc", uniform=False)


def run_egc(
    channels: Sequence[ChannelLike],
    task: TaskLike,
    synthesizer: ChannelLike,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Equal-Gain Combining: gleiche Gewichte, kein Fast-Path; d=1 entspricht SC."""
    return _run_synthesis_combiner(channels, task, synthesizer, context, "egc", uniform=True)


def run_soft_mrc(
    channels: Sequence[ChannelLike],
    task: TaskLike,
    synthesizer: ChannelLike,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """MRC mit intrinsischer Konfidenz als CSI; nur der konfidenteste Zweig wird bewertet."""
    pool = context.channels(channels)
    require_logprobs(pool)
    recorder = RunRecorder(task, "soft_mrc")
    branches = generate_branches(
        context, recorder, [(i, c, None) for i, c in enumerate(pool)], want_logprobs=True, score=False
    )
    confidences = [b.confidence or 0.0 for b in branches]
    weights = mrc_weights(confidences)
    recorder.metadata["weights"] = weights
    top = best_index(confidences)
    best = branches[top]
    best.score = recorder.add_score(context.scorer.score(recorder.task, best.text), individual=True)

    if len(branches) == 1:
        recorder.flag("single_branch")
        return _finish_sc(recorder, best)

    prompt = context.prompts.render(
        "mrc_synthesis",
        task=recorder.task.prompt,
        branches=_branch_blocks(branches, confidences, weights, top, False),
    )
    return _synthesize_with_guard(
        context, recorder, get_channel(synthesizer), prompt, MRC_SYNTHESIS_TEMPERATURE, best
    )


def _sample_plan(pool: List[Channel], n: int) -> BranchPlan:
    """Stichprobe i kommt von Kanal i mod d bei Temperatur 0.7."""
    if n < 1:
        raise ConfigValidationError("n muss >= 1 sein")
    return [(i % len(pool), pool[i % len(pool)], SAMPLE_TEMPERATURE) for i in range(n)]


def run_sc_n(
    channels: Sequence[ChannelLike], task: TaskLike, n: int = 5, *, context: TechniqueContext
) -> RunRecord:
    """SC über n Stichproben, zyklisch über die Kanäle verteilt."""
    pool = context.channels(channels)
    recorder = RunRecorder(task, "sc_n")
    branches = generate_branches(context, recorder, _sample_plan(pool, n))
    recorder.metadata["channel_sequence"] = [b.channel_index for b in branches]
    return _finish_sc(recorder, branches[best_index([b.quality for b in branches])])


def run_best_of_n(
    channel: ChannelLike, task: TaskLike, n: int = 5, *, context: TechniqueContext
) -> RunRecord:
    """Best-of-N: SC-N mit einem einzigen Kanal."""
    record = run_sc_n([channel], task, n, context=context)
    record.technique = "best_of_n"
    return record


def parse_cluster_labels(text: str, n: int) -> Optional[List[str]]:
    """Voter-Antwort → n normalisierte Labels, None wenn nicht lesbar."""
    array = extract_json_array(text)
    if array is None or len(array) != n:
        return None
    if any(not isinstance(x, (int, str)) or isinstance(x, bool) for x in array):
        return None
    return [str(x).strip().lower() for x in array]


def select_cluster(labels: Sequence[str], weights: Sequence[float]) -> Tuple[str, int]:
    """Cluster mit größter Gewichtssumme; zurück kommt (Label, Index des stärksten Mitglieds).

    Gleichstände: Cluster mit dem kleinsten ersten Mitglied, im Cluster der kleinste Index.
    """
    if len(labels) != len(weights) or not labels:
        raise ConfigValidationError("labels und weights müssen gleich lang und nicht leer sein")
    sums: Dict[str, float] = {}
    first: Dict[str, int] = {}
    for i, (label, weight) in enumerate(zip(labels, weights)):
        sums[label] = sums.get(label, 0.0) + weight
        first.setdefault(label, i)
    winner = max(sums, key=lambda lbl: (sums[lbl], -first[lbl]))
    members = [i for i, lbl in enumerate(labels) if lbl == winner]
    top = max(members, key=lambda i: (weights[i], -i))
    return winner, top


def _vote(
    context: TechniqueContext,
    recorder: RunRecorder,
    voter: Channel,
    branches: List[BranchResult],
) -> ClusterAssignment:
    n = len(branches)
    prompt = context.prompts.render(
        "voter",
        n=n,
        task=recorder.task.prompt,
        responses="\n\n".join(f"[{i + 1}]\n{b.text}" for i, b in enumerate(branches)),
    )
    try:
        reply = recorder.add_overhead(voter.generate(prompt, VOTER_TEMPERATURE))
    except ChannelTransportError as e:
        logger.warning(f"Voter nicht erreichbar, Singleton-Rückfall: {e}")
        recorder.flag("voter_fallback")
        return ClusterAssignment.singletons(n)
    labels = parse_cluster_labels(reply.text, n)
    if labels is None:
        logger.warning("Voter-Antwort nicht lesbar, Singleton-Rückfall")
        recorder.flag("voter_fallback")
        return ClusterAssignment.singletons(n)
    return ClusterAssignment(labels=labels, source=ClusterSource.VOTER)


def run_mrc_discrete_n(
    channels: Sequence[ChannelLike],
    task: TaskLike,
    n: int = 5,
    voter: Optional[ChannelLike] = None,
    *,
    context: TechniqueContext,
    mode: CombiningMode = CombiningMode.JUDGE,
) -> RunRecord:
    """Diskrete MRC: Voter-Clustering, Summe der Gewichte je Cluster, stärkstes Mitglied.

    ``mode`` wählt die Gewichtsquelle: Judge-Score, konstant 1 (Mehrheitsentscheid)
    oder intrinsische Konfidenz.
    """
    if n < 2:
        raise ConfigValidationError("Diskrete MRC braucht n >= 2")
    pool = context.channels(channels)
    if mode == CombiningMode.CONFIDENCE:
        require_logprobs(pool)
    technique = {
        CombiningMode.JUDGE: "mrc_discrete_n",
        CombiningMode.UNIFORM: "self_consistency",
        CombiningMode.CONFIDENCE: "mrc_discrete_n_soft",
    }[mode]
    recorder = RunRecorder(task, technique)
    branches = generate_branches(
        context,
        recorder,
        _sample_plan(pool, n),
        want_logprobs=mode == CombiningMode.CONFIDENCE,
        score=mode == CombiningMode.JUDGE,
    )

    voter_channel = get_channel(voter) if voter is not None else pool[0]
    assignment = _vote(context, recorder, voter_channel, branches)
    if mode == CombiningMode.JUDGE:
        weights = [b.quality for b in branches]
    elif mode == CombiningMode.UNIFORM:
        weights = [1.0] * len(branches)
    else:
        weights = [b.confidence or 0.0 for b in branches]

    cluster, top = select_cluster(assignment.labels, weights)
    recorder.metadata.update(
        {"labels": assignment.labels, "cluster_source": assignment.source.value, "cluster": cluster}
    )
    winner = branches[top]
    if winner.score is None:
        winner.score = recorder.add_score(
            context.scorer.score(recorder.task, winner.text), individual=True
        )
    return _finish_sc(recorder, winner)


def run_self_consistency(
    channels: Sequence[ChannelLike],
    task: TaskLike,
    n: int = 5,
    voter: Optional[ChannelLike] = None,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Mehrheitsentscheid: diskrete MRC mit q ≡ 1."""
    return run_mrc_discrete_n(channels, task, n, voter, context=context, mode=CombiningMode.UNIFORM)


def run_mrc_discrete_n_soft(
    channels: Sequence[ChannelLike],
    task: TaskLike,
    n: int = 5,
    voter: Optional[ChannelLike] = None,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Diskrete MRC mit Konfidenzsummen je Cluster (heuristisch, modellübergreifend nicht kalibriert)."""
    return run_mrc_discrete_n(
        channels, task, n, voter, context=context, mode=CombiningMode.CONFIDENCE
    )


__all__ = [
    "best_index",
    "generate_branches",
    "mrc_weights",
    "parse_cluster_labels",
    "require_logprobs",
    "run_baseline",
    "run_best_of_n",
    "run_egc",
    "run_mrc",
    "run_mrc_discrete_n",
    "run_mrc_discrete_n_soft",
    "run_sc",
    "run_sc_n",
    "run_self_consistency",
    "run_soft_mrc",
    "select_cluster",
]
