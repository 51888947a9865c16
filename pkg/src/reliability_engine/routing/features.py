"""Merkmalsvektoren für die gelernten Router."""

import math
import re
from typing import List, Optional, Sequence, Tuple

import numpy as np

_CODE = re.compile(r"```|\bdef |\bclass |\breturn\b|[{};]\s*$|\bfunction\b", re.MULTILINE)
_MATH = re.compile(r"[=+\-*/^]\s*\d|\\frac|\bsqrt\b|\bintegral\b|\bequation\b|[∑∫√π]", re.IGNORECASE)
_NUMBER = re.compile(r"\d")
_SENTENCE = re.compile(r"[.!?]+(?:\s|$)")
_WORD = re.compile(r"\S+")

PROMPT_FEATURES = (
    "log_words",
    "has_code",
    "has_math",
    "has_numbers",
    "has_question",
    "log_sentences",
    "mean_word_length",
)


def base_feature_names(categories: Sequence[str]) -> List[str]:
    return ["intercept", "difficulty"] + [f"cat_{c}" for c in categories]


def base_features(difficulty: float, category: str, categories: Sequence[str]) -> List[float]:
    """[1, d, One-Hot(Kategorie)]; unbekannte Kategorien ergeben eine Null-Zeile."""
    return [1.0, float(difficulty)] + [1.0 if category == c else 0.0 for c in categories]


def extract_prompt_features(prompt: str) -> List[float]:
    """Textmerkmale in der Reihenfolge von PROMPT_FEATURES."""
    words = _WORD.findall(prompt)
    sentences = max(1, len(_SENTENCE.findall(prompt)))
    mean_len = sum(len(w) for w in words) / len(words) if words else 0.0
    return [
        math.log1p(len(words)),
        1.0 if _CODE.search(prompt) else 0.0,
        1.0 if _MATH.search(prompt) else 0.0,
        1.0 if _NUMBER.search(prompt) else 0.0,
        1.0 if "?" in prompt else 0.0,
        math.log1p(sentences),
        mean_len,
    ]


def feature_matrix(
    rows: Sequence[Tuple[float, str, Optional[str]]],
    categories: Sequence[str],
    extended: bool = False,
) -> Tuple[List[str], np.ndarray]:
    """Baut X aus (Schwierigkeit, Kategorie, Prompt)-Tupeln."""
    names = base_feature_names(categories) + (list(PROMPT_FEATURES) if extended else [])
    matrix = []
    for difficulty, category, prompt in rows:
        row = base_features(difficulty, category, categories)
        if extended:
            row += extract_prompt_features(prompt or "")
        matrix.append(row)
    return names, np.asarray(matrix, dtype=float).reshape(len(matrix), len(names))
