import math
import random

import pytest

from revlens.affect import (
    EMOTION_LABELS,
    MORAL_LABELS,
    CategoryDistribution,
    aggregate_labels,
    labels_for,
    merge_distributions,
    spectrum_entropy,
)


def entropy_bruteforce(counts, n, base):
    """Independent oracle: direct term-by-term evaluation."""
    total = 0.0
    for c in counts:
        if c > 0:
            p = c / n
            total -= p * math.log(p) / math.log(base)
    return total


class TestAggregate:
    def test_label_sets(self):
        assert len(EMOTION_LABELS) == 8
        assert len(MORAL_LABELS) == 10
        assert MORAL_LABELS[:5] == ("care", "fairness", "loyalty", "authority", "sanctity")

    def test_no_labels(self):
        dist = aggregate_labels([], 5, "emotion")
        assert dist.counts == (0,) * 8
        assert dist.proportions == (0.0,) * 8

    def test_all_one_category(self):
        dist = aggregate_labels(["joy"] * 4, 4, "emotion")
        assert dist.counts[EMOTION_LABELS.index("joy")] == 4
        assert dist.proportions[EMOTION_LABELS.index("joy")] == 1.0

    def test_partial_labeling(self):
        dist = aggregate_labels(["joy", "joy", "trust"], 4, "emotion")
        assert dist.proportions[EMOTION_LABELS.index("joy")] == 0.5
        assert dist.proportions[EMOTION_LABELS.index("trust")] == 0.25
        assert sum(dist.counts) == 3

    def test_label_outside_set(self):
        with pytest.raises(ValueError):
            aggregate_labels(["happiness"], 3, "emotion")

    def test_zero_total(self):
        with pytest.raises(ValueError):
            aggregate_labels([], 0, "moral")

    def test_more_labels_than_sentences(self):
        with pytest.raises(ValueError):
            aggregate_labels(["joy"] * 5, 4, "emotion")

    def test_unknown_task(self):
        with pytest.raises(ValueError):
            labels_for("sentiment")

    def test_merge_additive(self):
        a = aggregate_labels(["joy", "trust"], 10, "emotion", "w")
        b = aggregate_labels(["joy"], 10, "emotion", "w")
        merged = merge_distributions(a, b)
        assert merged.counts[EMOTION_LABELS.index("joy")] == 2
        assert merged.counts[EMOTION_LABELS.index("trust")] == 1


class TestEntropy:
    def test_single_category_zero(self):
        dist = aggregate_labels(["care"] * 6, 6, "moral")
        assert spectrum_entropy(dist) == 0.0

    def test_uniform_eight_categories(self):
        dist = aggregate_labels(list(EMOTION_LABELS), 8, "emotion")
        assert spectrum_entropy(dist, 2.0) == 3.0

    def test_subnormalized_mass(self):
        dist = aggregate_labels(["joy", "joy"], 4, "emotion")
        assert spectrum_entropy(dist, 2.0) == 0.5

    def test_bad_base(self):
        dist = aggregate_labels(["joy"], 2, "emotion")
        with pytest.raises(ValueError):
            spectrum_entropy(dist, 1.0)

    def test_matches_bruteforce(self):
        rng = random.Random(19)
        for _ in range(200):
            task = rng.choice(["emotion", "moral"])
            order = labels_for(task)
            n = rng.randint(1, 30)
            labels = [rng.choice(order) for _ in range(rng.randint(0, n))]
            dist = aggregate_labels(labels, n, task)
            base = rng.choice([2.0, math.e, 10.0])
            want = entropy_bruteforce(dist.counts, n, base)
            assert abs(spectrum_entropy(dist, base) - want) < 1e-12

    def test_nonnegative_and_bounded_when_fully_labeled(self):
        rng = random.Random(21)
        for _ in range(100):
            task = rng.choice(["emotion", "moral"])
            order = labels_for(task)
            n = rng.randint(1, 40)
            labels = [rng.choice(order) for _ in range(n)]  # full labeling
            dist = aggregate_labels(labels, n, task)
            value = spectrum_entropy(dist, 2.0)
            assert 0.0 <= value <= math.log2(len(order)) + 1e-12

    def test_permutation_of_categories_invariant(self):
        counts = (3, 1, 0, 2, 0, 0, 1, 0)
        shuffled = (0, 1, 3, 0, 2, 1, 0, 0)
        a = CategoryDistribution("w", "emotion", counts, 10)
        b = CategoryDistribution("w", "emotion", shuffled, 10)
        assert abs(spectrum_entropy(a) - spectrum_entropy(b)) < 1e-15

    def test_splitting_mass_never_decreases_entropy(self):
        rng = random.Random(25)
        for _ in range(100):
            counts = [rng.randint(0, 8) for _ in range(8)]
            n = max(1, sum(counts) + rng.randint(0, 5))
            donors = [i for i, c in enumerate(counts) if c >= 2]
            if not donors:
                continue
            i = rng.choice(donors)
            j = rng.choice([k for k, c in enumerate(counts) if c == 0] or [i])
            if i == j:
                continue
            split = list(counts)
            moved = split[i] // 2
            split[i] -= moved
            split[j] += moved
            before = spectrum_entropy(CategoryDistribution("w", "emotion", tuple(counts), n))
            after = spectrum_entropy(CategoryDistribution("w", "emotion", tuple(split), n))
            assert after >= before - 1e-12
