"""Vorwärtsfehlerkorrektur im Prompt."""

from .fec_codec import parity_plan, run_chain_of_verification, run_fec
from .fec_models import ParityKind, ParitySection

__all__ = ["ParityKind", "ParitySection", "parity_plan", "run_chain_of_verification", "run_fec"]
