"""Shared result container for essay-level metrics."""

from __future__ import annotations

from typing import NamedTuple


class MetricValue(NamedTuple):
    """A metric score plus a flag marking degenerate input (too few units
    to form the statistic, in which case value is 0.0 by convention)."""

    value: float
    degenerate: bool = False
