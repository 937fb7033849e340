"""Nonparametric tests, quartile partitioning, and significance stars.

Exact p-values are computed by subset-sum dynamic programming over the
rank distribution (the same distribution brute-force enumeration walks)
and kept as Fractions; approximate branches use tie- and continuity-
corrected normal or Student-t tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import stdtr

WILCOXON_EXACT_LIMIT = 25
MANN_WHITNEY_EXACT_LIMIT = 8

STAR_LADDER = (
    (0.001, "***"),
    (0.01, "**"),
    (0.05, "*"),
    (0.1, "†"),
)


def star_label(p: float) -> str:
    """Significance stars under strict thresholds."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p-value {p} outside [0, 1]")
    for cutoff, stars in STAR_LADDER:
        if p < cutoff:
            return stars
    return "ns"


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n: tuple[int, ...]
    stars: str
    degenerate: bool = False
    p_exact: Fraction | None = None


def _result(statistic: float, p, method: str, n: tuple[int, ...], degenerate=False) -> TestResult:
    exact = p if isinstance(p, Fraction) else None
    p_float = float(p)
    return TestResult(
        statistic=float(statistic),
        p_value=p_float,
        method=method,
        n=n,
        stars=star_label(p_float),
        degenerate=degenerate,
        p_exact=exact,
    )


def average_ranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n with ties assigned the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j + 2) / 2  # positions are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _tie_term(values: Sequence[float]) -> float:
    """Sum of t^3 - t over tie groups."""
    seen: dict[float, int] = {}
    for v in values:
        seen[v] = seen.get(v, 0) + 1
    return float(sum(t**3 - t for t in seen.values() if t > 1))


def _two_sided_from_counts(count_le: int, count_ge: int, denominator: int) -> Fraction:
    tail = min(count_le, count_ge)
    return min(Fraction(1), 2 * Fraction(tail, denominator))


def _normal_two_sided(offset: float, sd: float) -> float:
    """Two-sided tail with a 0.5 continuity correction on the offset."""
    z = max(0.0, abs(offset) - 0.5) / sd
    return math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(paired: Sequence[tuple[float, float]]) -> TestResult:
    """Signed-rank test on (x, y) pairs; zero differences are dropped and
    tied magnitudes share average ranks. Exact two-sided p by enumeration
    of the sign-assignment distribution for n <= 25.
    """
    diffs = [x - y for x, y in paired if x != y]
    n = len(diffs)
    if n == 0:
        return _result(0.0, Fraction(1), "wilcoxon", (0,), degenerate=True)
    ranks = average_ranks([abs(d) for d in diffs])
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    if n <= WILCOXON_EXACT_LIMIT:
        doubled = [round(2 * r) for r in ranks]
        max_sum = sum(doubled)
        counts = [0] * (max_sum + 1)
        counts[0] = 1
        for r2 in doubled:
            for s in range(max_sum, r2 - 1, -1):
                if counts[s - r2]:
                    counts[s] += counts[s - r2]
        w2 = round(2 * w_plus)
        count_le = sum(counts[: w2 + 1])
        count_ge = sum(counts[w2:])
        p = _two_sided_from_counts(count_le, count_ge, 2**n)
        return _result(w_plus, p, "wilcoxon", (n,))
    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term([abs(d) for d in diffs]) / 48.0
    p = _normal_two_sided(w_plus - mean, math.sqrt(variance))
    return _result(w_plus, p, "wilcoxon", (n,))


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Rank-sum test for independent samples; reports U for the first
    sample. Exact two-sided p over all group assignments when the smaller
    sample has at most 8 observations and there are no ties.
    """
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    combined = list(x) + list(y)
    ranks = average_ranks(combined)
    r_x = sum(ranks[:n1])
    u_x = r_x - n1 * (n1 + 1) / 2.0
    n_total = n1 + n2
    has_ties = len(set(combined)) != n_total
    if min(n1, n2) <= MANN_WHITNEY_EXACT_LIMIT and not has_ties:
        # Distribution of the rank sum of the first sample over all
        # C(n_total, n1) equally likely assignments of ranks 1..N.
        max_sum = n_total * (n_total + 1) // 2
        counts = [[0] * (max_sum + 1) for _ in range(n1 + 1)]
        counts[0][0] = 1
        for rank in range(1, n_total + 1):
            for i in range(min(n1, rank), 0, -1):
                row, prev = counts[i], counts[i - 1]
                for s in range(max_sum, rank - 1, -1):
                    if prev[s - rank]:
                        row[s] += prev[s - rank]
        dist = counts[n1]
        base = n1 * (n1 + 1) // 2
        u_obs = round(u_x)
        count_le = sum(c for s, c in enumerate(dist) if s - base <= u_obs)
        count_ge = sum(c for s, c in enumerate(dist) if s - base >= u_obs)
        p = _two_sided_from_counts(count_le, count_ge, math.comb(n_total, n1))
        return _result(u_x, p, "mann_whitney", (n1, n2))
    tie_adjust = _tie_term(combined) / (n_total * (n_total - 1))
    variance = n1 * n2 / 12.0 * ((n_total + 1) - tie_adjust)
    if variance <= 0:
        return _result(u_x, Fraction(1), "mann_whitney", (n1, n2), degenerate=True)
    p = _normal_two_sided(u_x - n1 * n2 / 2.0, math.sqrt(variance))
    return _result(u_x, p, "mann_whitney", (n1, n2))


def spearman(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Rank correlation: Pearson correlation of average ranks, p from the
    Student-t approximation with n-2 degrees of freedom."""
    if len(x) != len(y):
        raise ValueError("samples must have equal length")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 observations")
    rx, ry = average_ranks(x), average_ranks(y)
    ax, ay = np.asarray(rx), np.asarray(ry)
    sx, sy = ax - ax.mean(), ay - ay.mean()
    denom = math.sqrt(float(sx @ sx) * float(sy @ sy))
    if denom == 0.0:
        return _result(0.0, 1.0, "spearman", (n,), degenerate=True)
    rho = float(sx @ sy) / denom
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return _result(rho, p, "spearman", (n,))


@dataclass(frozen=True)
class QuartileSplit:
    groups: dict[str, list]
    cutpoints: tuple[float, float, float]
    degenerate: bool


def quartile_split(items: Sequence[tuple]) -> QuartileSplit:
    """Partition (key, value) items into Q1..Q4 at the linear-interpolation
    25/50/75 percentiles; boundary ties go to the lower quartile."""
    if len(items) < 4:
        raise ValueError("need at least 4 items to form quartiles")
    values = np.asarray([v for _, v in items], dtype=np.float64)
    q1, q2, q3 = (float(np.percentile(values, q)) for q in (25, 50, 75))
    groups: dict[str, list] = {"Q1": [], "Q2": [], "Q3": [], "Q4": []}
    for key, value in items:
        if value <= q1:
            groups["Q1"].append(key)
        elif value <= q2:
            groups["Q2"].append(key)
        elif value <= q3:
            groups["Q3"].append(key)
        else:
            groups["Q4"].append(key)
    return QuartileSplit(groups, (q1, q2, q3), degenerate=(q1 == q3))
