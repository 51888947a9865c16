"""Toleranter Parser für strukturierte Kritiken und Extrinsic-Scaling."""

import logging
import math
import re
from typing import Any, Iterable, List, Optional

from ..core.parsing import extract_json_array
from ..exceptions import ConfigValidationError
from .retransmit_models import CritiqueIssue, IssueType, Severity

logger = logging.getLogger(__name__)

_PASS = re.compile(r"^\W*pass\W*$", re.IGNORECASE)
_FIX_KEYS = ("correction", "fix", "detail")


def normalize_quote(quote: str) -> str:
    """Whitespace-normalisiertes Zitat für den Dedup-Abgleich."""
    return " ".join(quote.split())


def _coerce_enum(value: Any, enum: Any, default: Any) -> Any:
    try:
        return enum(str(value).strip().lower())
    except ValueError:
        return default


def _issue_from(item: Any) -> Optional[CritiqueIssue]:
    if not isinstance(item, dict):
        return None
    quote = str(item.get("quote") or "").strip()
    if not quote:
        return None
    fix = next((str(item[k]) for k in _FIX_KEYS if item.get(k)), "")
    return CritiqueIssue(
        quote=quote,
        issue_type=_coerce_enum(item.get("type"), IssueType, IssueType.UNCLEAR),
        fix=fix,
        severity=_coerce_enum(item.get("severity"), Severity, Severity.MAJOR),
    )


def parse_critique(text: str) -> List[CritiqueIssue]:
    """Kritiker-Antwort → Befundliste.

    "[]" oder "PASS" ergeben eine leere Liste; nicht lesbare Antworten werden
    zu genau einem unstrukturierten Befund mit dem Rohtext.
    """
    stripped = text.strip()
    if not stripped or _PASS.match(stripped):
        return []
    array = extract_json_array(stripped)
    if array is None:
        logger.debug("Kritik nicht als JSON lesbar, unstrukturierter Befund")
        return [CritiqueIssue.unstructured(stripped)]
    if not array:
        return []
    issues = [issue for issue in (_issue_from(item) for item in array) if issue is not None]
    if not issues:
        logger.debug(f"Keiner der {len(array)} Befunde hat ein Zitat, unstrukturierter Befund")
        return [CritiqueIssue.unstructured(stripped)]
    return issues


def drop_applied(issues: Iterable[CritiqueIssue], applied: Iterable[str]) -> List[CritiqueIssue]:
    """Entfernt Befunde, deren Zitat bereits korrigiert wurde."""
    seen = {normalize_quote(q) for q in applied}
    return [i for i in issues if not i.structured or normalize_quote(i.quote) not in seen]


def scale_extrinsic(
    issues: List[CritiqueIssue],
    alpha: float,
    floor: Severity = Severity.MAJOR,
    cap: int = 2,
) -> List[CritiqueIssue]:
    """Severity-Floor, dann ⌈n·α⌉ schwerste Befunde (mindestens einer), dann harte Kappung."""
    if not 0 < alpha <= 1:
        raise ConfigValidationError(f"alpha muss in (0, 1] liegen, war {alpha}")
    if cap < 1:
        raise ConfigValidationError("cap muss >= 1 sein")
    surviving = [i for i in issues if i.severity.at_least(floor)]
    if not surviving:
        return []
    surviving.sort(key=lambda i: i.severity.rank)
    keep = max(1, math.ceil(round(len(surviving) * alpha, 9)))
    return surviving[: min(keep, cap)]


def format_corrections(issues: List[CritiqueIssue]) -> str:
    lines = []
    for n, issue in enumerate(issues, start=1):
        lines.append(f'{n}. [{issue.severity.value}] "{issue.quote}" -> {issue.fix or "fix this"}')
    return "\n".join(lines)


__all__ = ["drop_applied", "format_corrections", "normalize_quote", "parse_critique", "scale_extrinsic"]
