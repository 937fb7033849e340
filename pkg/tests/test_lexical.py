import random

import pytest

from revlens.lexical import mattr


def mattr_bruteforce(tokens, window):
    """Independent oracle: direct window enumeration with sets."""
    n = len(tokens)
    if n < window:
        return len(set(tokens)) / n
    ratios = [
        len(set(tokens[i : i + window])) / window for i in range(n - window + 1)
    ]
    return sum(ratios) / len(ratios)


class TestMattr:
    def test_constant_stream(self):
        assert mattr(["a", "a", "a", "a"], 2) == 0.5

    def test_all_distinct(self):
        assert mattr(["a", "b", "c", "d", "e"], 3) == 1.0

    def test_mixed_stream(self):
        assert abs(mattr(["a", "b", "a", "c", "b"], 3) - 8 / 9) < 1e-15

    def test_ttr_fallback_below_window(self):
        assert mattr(["a", "b", "a"], 10) == 2 / 3

    def test_window_one(self):
        assert mattr(["a", "b", "a"], 1) == 1.0

    def test_bad_window(self):
        with pytest.raises(ValueError):
            mattr(["a"], 0)

    def test_empty_tokens(self):
        with pytest.raises(ValueError):
            mattr([], 3)

    def test_matches_bruteforce(self):
        rng = random.Random(11)
        for _ in range(300):
            n = rng.randint(1, 60)
            alphabet = [f"w{i}" for i in range(rng.randint(1, 12))]
            tokens = [rng.choice(alphabet) for _ in range(n)]
            window = rng.randint(1, 70)
            assert abs(mattr(tokens, window) - mattr_bruteforce(tokens, window)) < 1e-12

    def test_range_and_equality_condition(self):
        rng = random.Random(13)
        for _ in range(100):
            n = rng.randint(5, 40)
            window = rng.randint(2, n)
            tokens = [rng.choice("abcdefg") for _ in range(n)]
            value = mattr(tokens, window)
            assert 1 / window - 1e-12 <= value <= 1.0 + 1e-12
            all_windows_distinct = all(
                len(set(tokens[i : i + window])) == window
                for i in range(n - window + 1)
            )
            assert (abs(value - 1.0) < 1e-12) == all_windows_distinct

    def test_alphabet_renaming_invariance(self):
        rng = random.Random(17)
        for _ in range(50):
            tokens = [rng.choice("abcd") for _ in range(rng.randint(1, 30))]
            window = rng.randint(1, 10)
            renamed = [f"X-{t}-Y" for t in tokens]
            assert mattr(tokens, window) == mattr(renamed, window)
