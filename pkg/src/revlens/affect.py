"""Writing-level emotion and moral distributions and their entropies.

Sentence labels come from the annotation pipeline; here they are counted
into fixed-order category vectors (8 emotions, 10 moral foundations) whose
denominator is the writing's total sentence count, then summarized by
Shannon entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

EMOTION_LABELS = (
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "sadness",
    "surprise",
    "trust",
)
MORAL_LABELS = (
    "care",
    "fairness",
    "loyalty",
    "authority",
    "sanctity",
    "harm",
    "cheating",
    "betrayal",
    "subversion",
    "degradation",
)
TASKS = ("emotion", "moral")

# Report-level groupings (not metrics themselves).
APPROACH_EMOTIONS = ("anticipation", "joy", "trust", "fear")
AVOIDANCE_EMOTIONS = ("surprise", "sadness", "disgust", "anger")
POSITIVE_MORALS = MORAL_LABELS[:5]
NEGATIVE_MORALS = MORAL_LABELS[5:]


def labels_for(task: str) -> tuple[str, ...]:
    if task == "emotion":
        return EMOTION_LABELS
    if task == "moral":
        return MORAL_LABELS
    raise ValueError(f"task must be one of {TASKS}, got {task!r}")


@dataclass(frozen=True)
class CategoryDistribution:
    writing_id: str
    task: str
    counts: tuple[int, ...]
    n: int

    @property
    def proportions(self) -> tuple[float, ...]:
        return tuple(c / self.n for c in self.counts)


def aggregate_labels(labels: Sequence[str], n_total: int, task: str, writing_id: str = "") -> CategoryDistribution:
    """Count final sentence labels into the task's fixed category order.

    n_total is the writing's total sentence count; filtered or unlabeled
    sentences contribute to the denominator only.
    """
    order = labels_for(task)
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    if len(labels) > n_total:
        raise ValueError(
            f"{len(labels)} labels exceed total sentence count {n_total}"
        )
    index = {label: i for i, label in enumerate(order)}
    counts = [0] * len(order)
    for label in labels:
        if label not in index:
            raise ValueError(f"label {label!r} outside the {task} closed set")
        counts[index[label]] += 1
    return CategoryDistribution(writing_id, task, tuple(counts), n_total)


def merge_distributions(a: CategoryDistribution, b: CategoryDistribution) -> CategoryDistribution:
    """Additive merge of two distributions for the same writing and task."""
    if (a.writing_id, a.task) != (b.writing_id, b.task):
        raise ValueError("can only merge distributions of the same writing and task")
    if a.n != b.n:
        raise ValueError("sentence totals differ")
    counts = tuple(x + y for x, y in zip(a.counts, b.counts))
    if sum(counts) > a.n:
        raise ValueError("merged counts exceed sentence total")
    return CategoryDistribution(a.writing_id, a.task, counts, a.n)


def spectrum_entropy(dist: CategoryDistribution, base: float = 2.0) -> float:
    """Shannon entropy of the category proportions counts[i]/n.

    Zero-count categories contribute nothing; proportions are not
    renormalized when they sum below 1 (the unlabeled remainder simply
    carries no entropy mass).
    """
    if base <= 1.0:
        raise ValueError(f"entropy base must exceed 1, got {base}")
    total = 0.0
    for count in dist.counts:
        if count > 0:
            p = count / dist.n
            if base == 2.0:
                total -= p * math.log2(p)
            else:
                total -= p * math.log(p) / math.log(base)
    return total
