"""Transcript normalization and sequence edit distance."""

from __future__ import annotations

import string
from typing import Sequence

_STRIP = string.punctuation + "‘’“”…"


def normalize_token(token: str) -> str:
    """Lowercase a token and strip leading/trailing punctuation."""
    return token.strip(_STRIP).lower()


def normalize_words(tokens: Sequence[str]) -> list[str]:
    """Normalize a token sequence, dropping tokens that normalize to nothing."""
    out = []
    for tok in tokens:
        norm = normalize_token(tok)
        if norm:
            out.append(norm)
    return out


def normalize_text(text: str) -> str:
    """Whitespace-split, normalize each token, and re-join with single spaces."""
    return " ".join(normalize_words(text.split()))


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance between two sequences (characters or tokens)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]
