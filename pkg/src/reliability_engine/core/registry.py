"""Technik-Registry: Technik-ID → Aufruf mit Kanalrollen und Parametern.

Von Harness, ACM und Router gemeinsam genutzt. Die Technikmodule werden erst
beim Aufruf importiert, damit ACM (das selbst hier registriert ist) die
Registry importieren kann.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, List, Optional

from ..channel.channel import ChannelLike
from ..exceptions import ConfigValidationError
from .context import TechniqueContext
from .run_models import RunRecord, TaskLike, TechniqueName

logger = logging.getLogger(__name__)


@dataclass
class ChannelRoles:
    """Kanal-Pool plus optionale Sonderrollen; leere Rollen fallen auf pool[0] zurück."""

    pool: List[ChannelLike]
    synthesizer: Optional[ChannelLike] = None
    critic: Optional[ChannelLike] = None
    voter: Optional[ChannelLike] = None
    decoder: Optional[ChannelLike] = None
    pilot: Optional[ChannelLike] = None

    def __post_init__(self) -> None:
        if not self.pool:
            raise ConfigValidationError("Kanal-Pool darf nicht leer sein")

    @property
    def primary(self) -> ChannelLike:
        return self.pool[0]

    def role(self, name: str) -> ChannelLike:
        return getattr(self, name) or self.primary

    def narrowed(self, branches: Optional[int] = None, model_id: Optional[str] = None) -> "ChannelRoles":
        """Pool mit bevorzugtem Modell vorn und optional auf ``branches`` gekürzt."""
        pool = list(self.pool)
        if model_id:
            preferred = [c for c in pool if _model_of(c) == model_id]
            if preferred:
                pool = preferred + [c for c in pool if _model_of(c) != model_id]
            else:
                logger.warning(f"Modell {model_id} nicht im Pool, nutze {_model_of(pool[0])}")
        if branches is not None:
            if branches < 1:
                raise ConfigValidationError("branches muss >= 1 sein")
            pool = [pool[i % len(pool)] for i in range(branches)] if branches > len(pool) else pool[:branches]
        return ChannelRoles(pool, self.synthesizer, self.critic, self.voter, self.decoder, self.pilot)


def _model_of(channel: ChannelLike) -> str:
    config = getattr(channel, "config", channel)
    return config.model_id


Runner = Callable[[ChannelRoles, TaskLike, TechniqueContext, Dict[str, Any]], RunRecord]


@dataclass(frozen=True)
class TechniqueSpec:
    runner: Runner
    params: FrozenSet[str] = field(default_factory=frozenset)


def _baseline(roles, task, context, p):
    from ..diversity.diversity_combiner import run_baseline

    return run_baseline(roles.primary, task, context=context)


def _sc(roles, task, context, p):
    from ..diversity.diversity_combiner import run_sc

    return run_sc(roles.pool, task, context=context)


def _mrc(roles, task, context, p):
    from ..diversity.diversity_combiner import run_mrc

    return run_mrc(roles.pool, task, roles.role("synthesizer"), context=context)


def _egc(roles, task, context, p):
    from ..diversity.diversity_combiner import run_egc

    return run_egc(roles.pool, task, roles.role("synthesizer"), context=context)


def _soft_mrc(roles, task, context, p):
    from ..diversity.diversity_combiner import run_soft_mrc

    return run_soft_mrc(roles.pool, task, roles.role("synthesizer"), context=context)


def _sc_n(roles, task, context, p):
    from ..diversity.diversity_combiner import run_sc_n

    return run_sc_n(roles.pool, task, p.get("n", 5), context=context)


def _best_of_n(roles, task, context, p):
    from ..diversity.diversity_combiner import run_best_of_n

    return run_best_of_n(roles.primary, task, p.get("n", 5), context=context)


def _discrete(name: str) -> Runner:
    def run(roles, task, context, p):
        from ..diversity import diversity_combiner

        runner = getattr(diversity_combiner, f"run_{name}")
        return runner(roles.pool, task, p.get("n", 5), roles.role("voter"), context=context)

    return run


def _harq_cc(roles, task, context, p):
    from ..retransmit.retransmit_decoder import run_harq_cc

    return run_harq_cc(
        roles.primary, task, p.get("max_rounds", 5), p.get("tau", 0.85),
        roles.synthesizer or roles.critic, context=context,
    )


def _harq_ir(roles, task, context, p):
    from ..retransmit.retransmit_decoder import run_harq_ir

    return run_harq_ir(
        roles.primary, roles.critic, task, p.get("max_rounds", 5), p.get("tau", 0.85),
        p.get("early_exit", False), context=context,
    )


def _turbo(roles, task, context, p):
    from ..retransmit.retransmit_decoder import run_turbo
    from ..retransmit.retransmit_models import Severity

    return run_turbo(
        roles.primary,
        roles.critic,
        task,
        max_iterations=p.get("max_iterations", p.get("max_rounds", 5)),
        tau=p.get("tau", 0.9),
        alpha0=p.get("alpha0", 0.5),
        severity_floor=Severity(p.get("severity_floor", "major")),
        max_corrections=p.get("max_corrections", 2),
        early_exit=p.get("early_exit", False),
        context=context,
    )


def _self_refine(roles, task, context, p):
    from ..retransmit.retransmit_decoder import run_self_refine

    return run_self_refine(roles.primary, task, p.get("max_rounds", 3), context=context)


def _fountain(soft: bool) -> Runner:
    def run(roles, task, context, p):
        from ..rateless.fountain_decoder import run_fountain, run_soft_fountain

        runner = run_soft_fountain if soft else run_fountain
        return runner(
            roles.pool, task, p.get("n_max", 10), p.get("n_min", 2), p.get("gamma", 0.85),
            roles.synthesizer, context=context,
        )

    return run


def _fec(roles, task, context, p):
    from ..fec.fec_codec import run_fec

    return run_fec(roles.primary, task, p.get("rate", 0.5), roles.decoder, context=context)


def _cove(roles, task, context, p):
    from ..fec.fec_codec import run_chain_of_verification

    return run_chain_of_verification(roles.primary, task, context=context)


def _acm(soft: bool) -> Runner:
    def run(roles, task, context, p):
        from ..routing.acm_router import default_soft_table, run_acm, run_soft_acm

        if soft:
            return run_soft_acm(roles, task, p.get("profiles") or default_soft_table(), context=context)
        if not p.get("profiles"):
            raise ConfigValidationError("ACM braucht eine MCS-Tabelle (profiles)")
        return run_acm(roles, task, p["profiles"], context=context)

    return run


_COMMON = frozenset({"branches", "model_id"})

TECHNIQUES: Dict[TechniqueName, TechniqueSpec] = {
    TechniqueName.BASELINE: TechniqueSpec(_baseline),
    TechniqueName.SC: TechniqueSpec(_sc),
    TechniqueName.MRC: TechniqueSpec(_mrc),
    TechniqueName.EGC: TechniqueSpec(_egc),
    TechniqueName.SOFT_MRC: TechniqueSpec(_soft_mrc),
    TechniqueName.SC_N: TechniqueSpec(_sc_n, frozenset({"n"})),
    TechniqueName.BEST_OF_N: TechniqueSpec(_best_of_n, frozenset({"n"})),
    TechniqueName.MRC_DISCRETE_N: TechniqueSpec(_discrete("mrc_discrete_n"), frozenset({"n"})),
    TechniqueName.MRC_DISCRETE_N_SOFT: TechniqueSpec(
        _discrete("mrc_discrete_n_soft"), frozenset({"n"})
    ),
    TechniqueName.SELF_CONSISTENCY: TechniqueSpec(_discrete("self_consistency"), frozenset({"n"})),
    TechniqueName.HARQ_CC: TechniqueSpec(_harq_cc, frozenset({"max_rounds", "tau"})),
    TechniqueName.HARQ_IR: TechniqueSpec(_harq_ir, frozenset({"max_rounds", "tau", "early_exit"})),
    TechniqueName.TURBO: TechniqueSpec(
        _turbo,
        frozenset(
            {"max_iterations", "max_rounds", "tau", "alpha0", "severity_floor", "max_corrections",
             "early_exit"}
        ),
    ),
    TechniqueName.SELF_REFINE: TechniqueSpec(_self_refine, frozenset({"max_rounds"})),
    TechniqueName.FOUNTAIN: TechniqueSpec(_fountain(False), frozenset({"n_max", "n_min", "gamma"})),
    TechniqueName.SOFT_FOUNTAIN: TechniqueSpec(
        _fountain(True), frozenset({"n_max", "n_min", "gamma"})
    ),
    TechniqueName.FEC: TechniqueSpec(_fec, frozenset({"rate"})),
    TechniqueName.CHAIN_OF_VERIFICATION: TechniqueSpec(_cove),
    TechniqueName.ACM: TechniqueSpec(_acm(False), frozenset({"profiles"})),
    TechniqueName.SOFT_ACM: TechniqueSpec(_acm(True), frozenset({"profiles"})),
}


def run_technique(
    technique: Any,
    roles: ChannelRoles,
    task: TaskLike,
    context: TechniqueContext,
    params: Optional[Dict[str, Any]] = None,
) -> RunRecord:
    """Führt eine registrierte Technik aus.

    Args:
        technique: Technik-ID (TechniqueName oder String)
        roles: Kanal-Pool und Sonderrollen
        task: Aufgabe
        context: Technik-Kontext
        params: Hyperparameter; unbekannte Schlüssel sind ein Konfigurationsfehler

    Returns:
        RunRecord der Technik
    """
    try:
        name = TechniqueName(technique)
    except ValueError:
        raise ConfigValidationError(f"Unbekannte Technik: {technique}")
    spec = TECHNIQUES[name]
    params = dict(params or {})
    unknown = set(params) - spec.params - _COMMON
    if unknown:
        raise ConfigValidationError(f"{name.value}: unbekannte Parameter {sorted(unknown)}")
    roles = roles.narrowed(params.pop("branches", None), params.pop("model_id", None))
    return spec.runner(roles, task, context, params)


__all__ = ["ChannelRoles", "TECHNIQUES", "TechniqueSpec", "run_technique"]
