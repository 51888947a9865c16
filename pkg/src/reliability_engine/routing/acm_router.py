"""Adaptive Coding & Modulation: Pilot-Schätzung und MCS-Tabellen-Auswahl."""

import logging
import math
import re
from typing import List, Optional, Sequence, Union

from ..channel.channel import ChannelLike, get_channel
from ..core.context import RunRecorder, TechniqueContext
from ..core.prompts import PromptLibrary
from ..core.registry import ChannelRoles, run_technique
from ..core.run_models import RunRecord, Task, TaskLike, TechniqueName
from ..exceptions import CapabilityError, ChannelTransportError, ConfigValidationError
from .routing_models import McsProfile, McsTable, PilotEstimate, PilotSource, ProfileKey

logger = logging.getLogger(__name__)

SELF_RATING_TEMPERATURE = 0.1
_RATING = re.compile(r"(?<![\d.])(0(?:\.\d+)?|1(?:\.0+)?|\.\d+)(?![\d.])")
_ROUTERS = {TechniqueName.ACM, TechniqueName.SOFT_ACM}

ProfilesLike = Union[McsTable, Sequence[McsProfile]]


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


def parse_self_rating(text: str) -> Optional[float]:
    """Erste Zahl in [0, 1] aus einer Selbsteinschätzung."""
    match = _RATING.search(text)
    return float(match.group(1)) if match else None


def pilot_estimate(
    channel: ChannelLike,
    task: TaskLike,
    prompts: Optional[PromptLibrary] = None,
    require_logprobs: bool = False,
) -> PilotEstimate:
    """Pilot-Probe mit Logprobs; sonst Selbsteinschätzung; sonst maximale Schwierigkeit.

    Args:
        channel: Pilot-Kanal
        task: Aufgabe
        prompts: Prompt-Bibliothek (Default: mitgelieferte Vorlagen)
        require_logprobs: Ohne Logprob-Unterstützung CapabilityError statt Selbsteinschätzung

    Returns:
        PilotEstimate mit allen Pilot-Aufrufen (als Overhead abzurechnen)
    """
    pilot = get_channel(channel)
    task = Task.coerce(task)
    prompts = prompts or PromptLibrary()
    outputs = []

    if pilot.config.supports_logprobs:
        try:
            probe = pilot.generate(prompts.render("pilot_probe", task=task.prompt), want_logprobs=True)
            outputs.append(probe)
            if probe.mean_logprob is not None:
                confidence = _clamp(math.exp(probe.mean_logprob))
                return PilotEstimate(
                    difficulty=_clamp(1.0 - confidence),
                    confidence=confidence,
                    source=PilotSource.LOGPROB,
                    outputs=outputs,
                )
            logger.warning(f"Pilot-Probe auf {pilot.name} ohne Logprobs")
        except ChannelTransportError as e:
            logger.warning(f"Pilot-Probe fehlgeschlagen: {e}")
    elif require_logprobs:
        raise CapabilityError(f"Soft-ACM braucht Logprobs, {pilot.name} liefert keine")

    if not require_logprobs:
        try:
            reply = pilot.generate(
                prompts.render("self_rating", task=task.prompt), SELF_RATING_TEMPERATURE
            )
            outputs.append(reply)
            rating = parse_self_rating(reply.text)
            if rating is not None:
                return PilotEstimate(
                    difficulty=rating,
                    confidence=1.0 - rating,
                    source=PilotSource.SELF_RATING,
                    outputs=outputs,
                )
            logger.warning(f"Selbsteinschätzung nicht lesbar: {reply.text[:60]!r}")
        except ChannelTransportError as e:
            logger.warning(f"Selbsteinschätzung fehlgeschlagen: {e}")

    logger.warning(f"Pilot für {task.id} gescheitert, maximale Schutzstufe")
    return PilotEstimate(
        difficulty=1.0, confidence=0.0, source=PilotSource.FALLBACK, degraded=True, outputs=outputs
    )


def pilot_difficulty(channel: ChannelLike, task: TaskLike) -> float:
    """d = clamp(1 − exp(ℓ̄)); Pilot-Kosten werden hier nicht zurückgegeben."""
    return pilot_estimate(channel, task).difficulty


def as_table(profiles: ProfilesLike, key: ProfileKey = ProfileKey.DIFFICULTY) -> McsTable:
    if isinstance(profiles, McsTable):
        return profiles
    return McsTable(key=key, profiles=list(profiles))


def select_profile(profiles: ProfilesLike, value: float) -> McsProfile:
    """Erstes Profil, dessen Bereich den Wert enthält; sonst das Auffangprofil."""
    table = as_table(profiles)
    for profile in table.profiles:
        if profile.contains(value):
            return profile
    logger.debug(f"Kein Profil für {value:.3f}, Auffangprofil {table.catch_all.name}")
    return table.catch_all


def _roles(channels: Union[ChannelRoles, Sequence[ChannelLike]]) -> ChannelRoles:
    return channels if isinstance(channels, ChannelRoles) else ChannelRoles(list(channels))


def _run_routed(
    roles: ChannelRoles,
    task: TaskLike,
    table: McsTable,
    context: TechniqueContext,
    technique: str,
    soft: bool,
) -> RunRecord:
    recorder = RunRecorder(task, technique)
    estimate = pilot_estimate(
        roles.role("pilot"), recorder.task, context.prompts, require_logprobs=soft
    )
    for output in estimate.outputs:
        recorder.add_overhead(output)
    if estimate.degraded:
        recorder.flag("pilot_degraded")

    value = estimate.confidence if table.key == ProfileKey.CONFIDENCE else estimate.difficulty
    profile = select_profile(table, value)
    if profile.technique in _ROUTERS:
        raise ConfigValidationError(f"Profil {profile.name}: ACM kann nicht auf ACM routen")
    logger.info(
        f"{technique}: {recorder.task.id} {table.key.value}={value:.3f} → {profile.name} "
        f"({profile.technique.value})"
    )

    params = dict(profile.params)
    if profile.model_id:
        params["model_id"] = profile.model_id
    record = run_technique(profile.technique, roles, recorder.task, context, params)
    recorder.merge(record)
    recorder.metadata.update(
        {
            "difficulty": estimate.difficulty,
            "pilot_confidence": estimate.confidence,
            "pilot_source": estimate.source.value,
            "profile": profile.name,
            "selected_technique": profile.technique.value,
            "selected_metadata": record.metadata,
        }
    )
    return recorder.finish(record.combined_text, record.final_quality, rounds=record.rounds)


def run_acm(
    channels: Union[ChannelRoles, Sequence[ChannelLike]],
    task: TaskLike,
    profiles: ProfilesLike,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """Pilot → Schwierigkeit → erstes passendes MCS-Profil → dessen Technik."""
    table = as_table(profiles)
    if table.key != ProfileKey.DIFFICULTY:
        raise ConfigValidationError("run_acm erwartet eine nach Schwierigkeit geordnete Tabelle")
    return _run_routed(_roles(channels), task, table, context, "acm", soft=False)


def run_soft_acm(
    channels: Union[ChannelRoles, Sequence[ChannelLike]],
    task: TaskLike,
    profiles: Optional[ProfilesLike] = None,
    *,
    context: TechniqueContext,
) -> RunRecord:
    """ACM mit Pilot-Konfidenz c = exp(ℓ̄) als Schlüssel; braucht Logprobs."""
    table = as_table(profiles, ProfileKey.CONFIDENCE) if profiles is not None else default_soft_table()
    if table.key != ProfileKey.CONFIDENCE:
        raise ConfigValidationError("run_soft_acm erwartet eine nach Konfidenz geordnete Tabelle")
    return _run_routed(_roles(channels), task, table, context, "soft_acm", soft=True)


def default_soft_table() -> McsTable:
    """Konfidenz-Tabelle ohne uncodierte Stufe."""
    profiles: List[McsProfile] = [
        McsProfile(name="SOFT-0", difficulty_range=(0.7, 1.0), technique=TechniqueName.FEC,
                   params={"rate": 0.75}),
        McsProfile(name="SOFT-1", difficulty_range=(0.5, 0.7), technique=TechniqueName.FEC,
                   params={"rate": 0.5}),
        McsProfile(name="SOFT-2", difficulty_range=(0.3, 0.5), technique=TechniqueName.HARQ_IR),
        McsProfile(name="SOFT-3", difficulty_range=(0.0, 0.3), technique=TechniqueName.MRC,
                   max_protection=True),
    ]
    return McsTable(name="soft-default", key=ProfileKey.CONFIDENCE, profiles=profiles)


__all__ = [
    "default_soft_table",
    "parse_self_rating",
    "pilot_difficulty",
    "pilot_estimate",
    "run_acm",
    "run_soft_acm",
    "select_profile",
]
