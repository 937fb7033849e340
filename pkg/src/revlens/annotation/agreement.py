"""Inter-annotator agreement statistics.

Both kappas are computed with exact rational arithmetic and floated at
the end, so hand-computed expected values compare cleanly.
"""

from __future__ import annotations

from collections import Counter
from fractions import Fraction
from typing import Sequence


def cohen_kappa(labels_a: Sequence[str], labels_b: Sequence[str]) -> float:
    """Two-rater chance-corrected agreement.

    The all-identical degenerate case (chance agreement 1 with observed
    agreement 1) returns 1.0.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError(f"length mismatch: {len(labels_a)} vs {len(labels_b)}")
    if not labels_a:
        raise ValueError("need at least one pair of labels")
    n = len(labels_a)
    observed = Fraction(sum(1 for a, b in zip(labels_a, labels_b) if a == b), n)
    count_a, count_b = Counter(labels_a), Counter(labels_b)
    expected = sum(
        Fraction(count_a[label], n) * Fraction(count_b.get(label, 0), n)
        for label in count_a
    )
    if expected == 1:
        return 1.0 if observed == 1 else float("nan")
    return float((observed - expected) / (1 - expected))


def fleiss_kappa(label_matrix: Sequence[Sequence[str]]) -> float | None:
    """Multi-rater agreement over items x raters label assignments.

    Every item must carry the same number of ratings. Returns None (the
    degenerate marker) when chance agreement is 1, i.e. a single category
    is used everywhere.
    """
    if not label_matrix:
        raise ValueError("empty label matrix")
    r = len(label_matrix[0])
    if r < 2:
        raise ValueError("need at least two raters")
    for i, row in enumerate(label_matrix):
        if len(row) != r:
            raise ValueError(f"item {i} has {len(row)} ratings, expected {r}")
    n_items = len(label_matrix)
    categories = sorted({label for row in label_matrix for label in row})
    counts = [Counter(row) for row in label_matrix]

    p_bar = Fraction(0)
    for row_counts in counts:
        pairs = sum(c * c for c in row_counts.values()) - r
        p_bar += Fraction(pairs, r * (r - 1))
    p_bar /= n_items

    p_e = Fraction(0)
    total = n_items * r
    for cat in categories:
        share = Fraction(sum(rc.get(cat, 0) for rc in counts), total)
        p_e += share * share

    if p_e == 1:
        return None
    return float((p_bar - p_e) / (1 - p_e))
