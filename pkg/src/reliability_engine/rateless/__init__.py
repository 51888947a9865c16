"""Ratenlose Kombination mit konfidenzgesteuertem Abbruch."""

from .fountain_decoder import fountain_confidence, run_fountain, run_soft_fountain
from .rateless_models import StopReason

__all__ = ["StopReason", "fountain_confidence", "run_fountain", "run_soft_fountain"]
