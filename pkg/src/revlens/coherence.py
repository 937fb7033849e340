"""Semantic dispersion and shift over per-sentence embeddings.

Both metrics support two polarities: "similarity" reports mean cosine
(the formula-literal reading) and "distance" reports mean (1 - cosine),
the default, under which larger values mean broader coverage / sharper
transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .embeddings import EmbeddingVector, cosine
from .metrics_base import MetricValue

POLARITIES = ("distance", "similarity")


@dataclass(frozen=True)
class CoherenceScores:
    writing_id: str
    dispersion: float
    shift: float
    polarity: str
    degenerate: bool = False


def _check_polarity(polarity: str) -> None:
    if polarity not in POLARITIES:
        raise ValueError(f"polarity must be one of {POLARITIES}, got {polarity!r}")


def semantic_dispersion(vectors: Sequence[EmbeddingVector], polarity: str = "distance") -> MetricValue:
    """Mean cosine over all ordered sentence pairs (similarity polarity),
    or mean (1 - cosine) (distance polarity)."""
    _check_polarity(polarity)
    n = len(vectors)
    if n < 2:
        return MetricValue(0.0, degenerate=True)
    terms = [
        2.0 * cosine(vectors[i], vectors[j])
        for i in range(n)
        for j in range(i + 1, n)
    ]
    # fsum makes the mean independent of pair order (exact permutation invariance).
    mean_cos = math.fsum(terms) / (n * (n - 1))
    return MetricValue(1.0 - mean_cos if polarity == "distance" else mean_cos)


def semantic_shift(vectors: Sequence[EmbeddingVector], polarity: str = "distance") -> MetricValue:
    """Mean cosine between contiguous sentences (similarity polarity), or
    mean (1 - cosine) (distance polarity)."""
    _check_polarity(polarity)
    n = len(vectors)
    if n < 2:
        return MetricValue(0.0, degenerate=True)
    total = sum(cosine(vectors[i], vectors[i + 1]) for i in range(n - 1))
    mean_cos = total / (n - 1)
    return MetricValue(1.0 - mean_cos if polarity == "distance" else mean_cos)


def coherence_scores(
    writing_id: str, vectors: Sequence[EmbeddingVector], polarity: str = "distance"
) -> CoherenceScores:
    dis = semantic_dispersion(vectors, polarity)
    shift = semantic_shift(vectors, polarity)
    return CoherenceScores(
        writing_id=writing_id,
        dispersion=dis.value,
        shift=shift.value,
        polarity=polarity,
        degenerate=dis.degenerate or shift.degenerate,
    )
