"""Strict TSV validation for model outputs.

Every batch reply must satisfy five conditions before it may be appended
to the streaming results: (i) row count equals the input batch size,
(ii) every row has the schema's field count, (iii) the first column
repeats the batch's sentence ids in order, (iv) closed-set columns hold
only allowed values, and (v) confidence columns are two-decimal numbers
in [0, 1]. Violations are data, not exceptions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from ..affect import labels_for

CONDITIONS = ("i", "ii", "iii", "iv", "v")
_CONFIDENCE_RE = re.compile(r"^\d+\.\d{2}$")


@dataclass(frozen=True)
class SentenceKey:
    writing_id: str
    sentence_id: int

    def wire(self) -> str:
        return f"{self.writing_id}:{self.sentence_id}"

    @classmethod
    def from_wire(cls, wire: str) -> "SentenceKey":
        writing_id, _, ordinal = wire.rpartition(":")
        return cls(writing_id, int(ordinal))


@dataclass(frozen=True)
class TsvSchema:
    """Shape contract for one pipeline stage's reply rows."""

    stage: str
    n_fields: int
    closed_sets: Mapping[int, frozenset[str]]   # column index -> allowed values
    confidence_cols: tuple[int, ...] = ()


@dataclass(frozen=True)
class Violation:
    condition: str          # one of CONDITIONS
    row: int | None         # 1-based reply row, None for whole-reply issues
    message: str


_YN = frozenset({"y", "n"})


def filter_schema(task: str) -> TsvSchema:
    labels_for(task)  # validate task name
    return TsvSchema("filter", 2, {1: _YN})


def a1_schema(task: str) -> TsvSchema:
    return TsvSchema("a1", 4, {1: frozenset(labels_for(task))}, confidence_cols=(2,))


def b_schema(task: str) -> TsvSchema:
    return TsvSchema("b", 4, {1: _YN, 3: frozenset(labels_for(task))})


def a2_schema(task: str) -> TsvSchema:
    return TsvSchema("a2", 4, {1: frozenset(labels_for(task))}, confidence_cols=(2,))


def validate_tsv(raw: str, batch: Sequence[SentenceKey], schema: TsvSchema) -> list[Violation]:
    """Check a raw reply against the five output conditions.

    Returns an empty list when the reply is acceptable; otherwise one
    Violation per failed condition occurrence, with 1-based row numbers.
    """
    rows = [line for line in raw.split("\n") if line.strip() != ""]
    violations: list[Violation] = []
    if len(rows) != len(batch):
        violations.append(
            Violation("i", None, f"expected {len(batch)} rows, got {len(rows)}")
        )
    for row_no, line in enumerate(rows, start=1):
        fields = line.split("\t")
        if len(fields) != schema.n_fields:
            violations.append(
                Violation("ii", row_no, f"expected {schema.n_fields} fields, got {len(fields)}")
            )
            continue
        if row_no <= len(batch):
            expected = batch[row_no - 1].wire()
            if fields[0] != expected:
                violations.append(
                    Violation("iii", row_no, f"id {fields[0]!r} does not match input order ({expected!r})")
                )
        for col, allowed in schema.closed_sets.items():
            if fields[col] not in allowed:
                violations.append(
                    Violation("iv", row_no, f"value {fields[col]!r} outside the closed set (column {col})")
                )
        for col in schema.confidence_cols:
            text = fields[col]
            if not _CONFIDENCE_RE.match(text) or not (0.0 <= float(text) <= 1.0):
                violations.append(
                    Violation("v", row_no, f"confidence {text!r} is not a two-decimal value in [0, 1]")
                )
    return violations
