"""Report rendering: CSV tables with markdown sidecars.

All table output is CSV for machine checking; each table also gets a
markdown rendering for reading. Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Mapping, Sequence


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_jsonl(path: str | Path, rows: Sequence[Mapping]) -> None:
    text = "".join(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n" for row in rows)
    atomic_write(path, text)


def format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_table(path: str | Path, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Write a CSV table plus a .md sidecar with the same content."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    atomic_write(path, buffer.getvalue())

    lines = ["| " + " | ".join(columns) + " |",
             "| " + " | ".join("---" for _ in columns) + " |"]
    for row in rows:
        lines.append("| " + " | ".join(format_cell(v) for v in row) + " |")
    atomic_write(Path(path).with_suffix(".md"), "\n".join(lines) + "\n")


def coefficient_cell(coefficient: float, std_error: float, stars: str) -> str:
    """Regression-table cell: coefficient with stars, SE in parentheses."""
    suffix = stars if stars != "ns" else ""
    return f"{coefficient:.3f}{suffix} ({std_error:.3f})"
