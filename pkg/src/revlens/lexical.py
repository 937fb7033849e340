"""Lexical richness via the moving-average type-token ratio."""

from __future__ import annotations

from collections import Counter
from typing import Sequence


def mattr(tokens: Sequence[str], window: int = 50) -> float:
    """Mean distinct-token fraction over every window of the given size.

    For streams shorter than the window this falls back to the plain
    type-token ratio (the window-equals-length limit).
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if not tokens:
        raise ValueError("token stream is empty")
    n = len(tokens)
    if n < window:
        return len(set(tokens)) / n
    counts: Counter[str] = Counter(tokens[:window])
    distinct = len(counts)
    total = distinct
    for i in range(1, n - window + 1):
        out_tok, in_tok = tokens[i - 1], tokens[i + window - 1]
        counts[out_tok] -= 1
        if counts[out_tok] == 0:
            del counts[out_tok]
        counts[in_tok] += 1
        distinct = len(counts)
        total += distinct
    return total / ((n - window + 1) * window)
