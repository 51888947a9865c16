"""Mehrstufiges Extrahieren von JSON-Arrays aus LLM-Antworten."""

import json
import re
from typing import Any, List, Optional

_FENCED = re.compile(r"```(?:json|JSON)?\s*(.*?)```", re.DOTALL)
_INLINE_ARRAY = re.compile(r"\[.*\]", re.DOTALL)


def _try_array(candidate: str) -> Optional[List[Any]]:
    try:
        value = json.loads(candidate)
    except (json.JSONDecodeError, TypeError, ValueError):
        return None
    return value if isinstance(value, list) else None


def extract_json_array(text: str) -> Optional[List[Any]]:
    """Roh → ohne Backticks → Fenced Block → Inline-Array; None wenn nichts passt."""
    stages = [text.strip(), text.strip().strip("`").strip()]
    fenced = _FENCED.search(text)
    if fenced:
        stages.append(fenced.group(1).strip())
    inline = _INLINE_ARRAY.search(text)
    if inline:
        stages.append(inline.group(0))
    for candidate in stages:
        array = _try_array(candidate)
        if array is not None:
            return array
    return None
