"""Wiederholungsverfahren: HARQ-CC, HARQ-IR, Turbo und Self-Refine."""

from .critique_parser import parse_critique, scale_extrinsic
from .retransmit_decoder import run_harq_cc, run_harq_ir, run_self_refine, run_turbo
from .retransmit_models import CritiqueIssue, IssueType, Severity

__all__ = [
    "CritiqueIssue",
    "IssueType",
    "Severity",
    "parse_critique",
    "run_harq_cc",
    "run_harq_ir",
    "run_self_refine",
    "run_turbo",
    "scale_extrinsic",
]
