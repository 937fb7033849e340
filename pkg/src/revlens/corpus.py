"""Corpus data model and ingestion.

Essays arrive as JSONL (one record per line, mixed record kinds) and are
normalized into an indexed, immutable bundle of drafts, suggestion sets and
grades. This module also owns the text primitives the rest of the pipeline
builds on: sentence segmentation, the bilingual tokenizer, rule-based coarse
filtering, outlier trimming and grade normalization.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

PHASES = ("pre", "post")
STAGES = ("initial", "final")
GRADERS = ("llm", "teacher")

# Sentence terminators: the three full-width terminal marks plus newline.
# Western ./?/! and the ellipsis are deliberately not terminators by default.
_DEFAULT_DELIMITERS = "。？！\n"  # 。 ？ ！ \n

# Han ranges used by both the tokenizer and the coarse filter: CJK Unified
# Ideographs, Extension A, and the compatibility block.
_HAN_RANGES = "㐀-䶿一-鿿豈-﫿"
_HAN_RE = re.compile(f"[{_HAN_RANGES}]")
# One token per Han ideograph; digit runs and non-Han letter runs group.
_TOKEN_RE = re.compile(rf"[{_HAN_RANGES}]|\d+|[^\W\d_{_HAN_RANGES}]+")


class CorpusError(Exception):
    """Base class for corpus-layer failures."""


class RecordParseError(CorpusError):
    """A JSONL line could not be parsed or failed a type invariant."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ReferentialIntegrityError(CorpusError):
    """A record references a writing_id that does not exist."""

    def __init__(self, missing: Sequence[str]):
        self.missing = tuple(missing)
        super().__init__(f"dangling writing_id reference(s): {', '.join(self.missing)}")


class GradeRangeError(CorpusError):
    pass


class DegenerateScaleError(CorpusError):
    pass


@dataclass(frozen=True)
class EssayDraft:
    writing_id: str
    student_id: str
    teacher_id: str
    task_id: str
    school_id: str
    phase: str
    text: str
    timestamp: str

    def __post_init__(self):
        if self.phase not in PHASES:
            raise RecordParseError(f"phase must be one of {PHASES}, got {self.phase!r}")
        if not self.text.strip():
            raise RecordParseError(f"draft {self.writing_id!r} has empty text")


@dataclass(frozen=True)
class Sentence:
    writing_id: str
    sentence_id: int
    text: str


@dataclass(frozen=True)
class Grade:
    writing_id: str
    grader: str
    phase: str
    value: float

    def __post_init__(self):
        if self.grader not in GRADERS:
            raise RecordParseError(f"grader must be one of {GRADERS}, got {self.grader!r}")
        if self.phase not in PHASES:
            raise RecordParseError(f"phase must be one of {PHASES}, got {self.phase!r}")
        if not (0.0 <= self.value <= 100.0):
            raise RecordParseError(f"grade value {self.value} outside [0, 100]")


@dataclass(frozen=True)
class Suggestion:
    suggestion_id: str
    text: str
    direction_tag: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise RecordParseError(f"suggestion {self.suggestion_id!r} has empty text")


@dataclass(frozen=True)
class SuggestionSet:
    writing_id: str
    stage: str
    suggestions: tuple[Suggestion, ...]

    def __post_init__(self):
        if self.stage not in STAGES:
            raise RecordParseError(f"stage must be one of {STAGES}, got {self.stage!r}")
        ids = [s.suggestion_id for s in self.suggestions]
        if len(set(ids)) != len(ids):
            raise RecordParseError(
                f"duplicate suggestion ids in set for writing {self.writing_id!r}"
            )


@dataclass
class CorpusBundle:
    """Validated, cross-referenced corpus contents in input order."""

    drafts: list[EssayDraft] = field(default_factory=list)
    suggestion_sets: list[SuggestionSet] = field(default_factory=list)
    grades: list[Grade] = field(default_factory=list)

    def draft_ids(self) -> set[str]:
        return {d.writing_id for d in self.drafts}

    def draft(self, writing_id: str) -> EssayDraft:
        for d in self.drafts:
            if d.writing_id == writing_id:
                return d
        raise KeyError(writing_id)

    def suggestions_for(self, writing_id: str, stage: str) -> SuggestionSet | None:
        for s in self.suggestion_sets:
            if s.writing_id == writing_id and s.stage == stage:
                return s
        return None

    def grade_for(self, writing_id: str, grader: str, phase: str) -> Grade | None:
        for g in self.grades:
            if g.writing_id == writing_id and g.grader == grader and g.phase == phase:
                return g
        return None

    def pairs(self) -> list[tuple[EssayDraft, EssayDraft]]:
        """(pre, post) draft pairs sharing (student_id, task_id)."""
        pre = {(d.student_id, d.task_id): d for d in self.drafts if d.phase == "pre"}
        out = []
        for d in self.drafts:
            if d.phase == "post" and (d.student_id, d.task_id) in pre:
                out.append((pre[(d.student_id, d.task_id)], d))
        return out


def segment_sentences(text: str, writing_id: str = "", delimiters: str = _DEFAULT_DELIMITERS) -> list[Sentence]:
    """Split an essay into ordered sentences.

    Delimiters are consumed, whitespace-only fragments dropped, and ordinals
    assigned 1-based in order of appearance.
    """
    parts = re.split(f"[{re.escape(delimiters)}]", text)
    sentences = []
    for part in parts:
        stripped = part.strip()
        if stripped:
            sentences.append(Sentence(writing_id, len(sentences) + 1, stripped))
    return sentences


def tokenize(text: str) -> list[str]:
    """Bilingual token stream: Han ideographs one per token, Latin-script
    word runs and digit runs grouped, punctuation discarded."""
    return _TOKEN_RE.findall(text)


def coarse_filter(sentence: Sentence) -> bool:
    """Keep-flag for the rule-based pre-filter.

    Rejects symbol-only fragments and very short pure-Han fragments
    (at most four ideographs with no other word characters).
    """
    text = sentence.text
    if not any(ch.isalpha() for ch in text):
        return False
    han_count = len(_HAN_RE.findall(text))
    other_word = any(
        (ch.isalpha() or ch.isdigit()) and not _HAN_RE.match(ch) for ch in text
    )
    if han_count <= 4 and not other_word:
        return False
    return True


def nearest_rank_quantile(sorted_values: Sequence[float], q: float) -> float:
    """Nearest-rank quantile of an ascending sequence; q in [0, 1]."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("quantile of empty sequence")
    if q <= 0:
        return sorted_values[0]
    rank = min(n, max(1, math.ceil(q * n)))
    return sorted_values[rank - 1]


def trim_outliers(corpus: Sequence[EssayDraft], fraction: float) -> list[EssayDraft]:
    """Drop essays whose sentence count or token count falls outside the
    [fraction, 1-fraction] nearest-rank quantile band of the corpus.

    Quantiles are global over the corpus; survivors keep input order.
    """
    if not (0 <= fraction < 0.5):
        raise ValueError(f"trim fraction must be in [0, 0.5), got {fraction}")
    if not corpus:
        return []
    sent_counts = [len(segment_sentences(d.text)) for d in corpus]
    tok_counts = [len(tokenize(d.text)) for d in corpus]
    survivors = []
    for d, stats in zip(corpus, zip(sent_counts, tok_counts)):
        inside = True
        for stat, values in zip(stats, (sent_counts, tok_counts)):
            ordered = sorted(values)
            lo = nearest_rank_quantile(ordered, fraction)
            hi = nearest_rank_quantile(ordered, 1 - fraction)
            if stat < lo or stat > hi:
                inside = False
        if inside:
            survivors.append(d)
    return survivors


def normalize_grade(raw: float, raw_min: float, raw_max: float) -> float:
    """Affine map of raw onto [0, 100]."""
    if raw_min >= raw_max:
        raise DegenerateScaleError(f"raw_min {raw_min} must be < raw_max {raw_max}")
    if not (raw_min <= raw <= raw_max):
        raise GradeRangeError(f"raw value {raw} outside [{raw_min}, {raw_max}]")
    return (raw - raw_min) / (raw_max - raw_min) * 100.0


def _draft_from_record(rec: dict, line_no: int) -> EssayDraft:
    try:
        return EssayDraft(
            writing_id=str(rec["writing_id"]),
            student_id=str(rec["student_id"]),
            teacher_id=str(rec["teacher_id"]),
            task_id=str(rec["task_id"]),
            school_id=str(rec["school_id"]),
            phase=rec["phase"],
            text=rec["text"],
            timestamp=str(rec.get("timestamp", "")),
        )
    except KeyError as exc:
        raise RecordParseError(f"draft record missing field {exc}", line_no)


def _suggestion_set_from_record(rec: dict, line_no: int) -> SuggestionSet:
    try:
        suggestions = tuple(
            Suggestion(
                suggestion_id=str(s["suggestion_id"]),
                text=s["text"],
                direction_tag=s.get("direction_tag"),
            )
            for s in rec["suggestions"]
        )
        return SuggestionSet(
            writing_id=str(rec["writing_id"]), stage=rec["stage"], suggestions=suggestions
        )
    except KeyError as exc:
        raise RecordParseError(f"suggestion-set record missing field {exc}", line_no)


def _grade_from_record(rec: dict, line_no: int) -> Grade:
    try:
        return Grade(
            writing_id=str(rec["writing_id"]),
            grader=rec["grader"],
            phase=rec["phase"],
            value=float(rec["value"]),
        )
    except KeyError as exc:
        raise RecordParseError(f"grade record missing field {exc}", line_no)


def load_corpus(path: str | Path) -> CorpusBundle:
    """Read a mixed JSONL corpus file into a validated bundle.

    Record kinds are distinguished by field signature: a "suggestions" field
    marks a suggestion set, a "grader" field a grade, and "phase" plus
    "text" a draft. Every suggestion set and grade must reference an
    existing draft writing_id.
    """
    bundle = CorpusBundle()
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordParseError(f"invalid JSON ({exc.msg})", line_no)
            if not isinstance(rec, dict):
                raise RecordParseError("record is not a JSON object", line_no)
            try:
                if "suggestions" in rec:
                    bundle.suggestion_sets.append(_suggestion_set_from_record(rec, line_no))
                elif "grader" in rec:
                    bundle.grades.append(_grade_from_record(rec, line_no))
                elif "phase" in rec and "text" in rec:
                    bundle.drafts.append(_draft_from_record(rec, line_no))
                else:
                    raise RecordParseError("unrecognized record kind", line_no)
            except RecordParseError as exc:
                if exc.line_no is None:
                    raise RecordParseError(str(exc), line_no) from exc
                raise
    known = bundle.draft_ids()
    dangling = sorted(
        {s.writing_id for s in bundle.suggestion_sets if s.writing_id not in known}
        | {g.writing_id for g in bundle.grades if g.writing_id not in known}
    )
    if dangling:
        raise ReferentialIntegrityError(dangling)
    dup_keys: set[tuple[str, str, str]] = set()
    for d in bundle.drafts:
        key = (d.student_id, d.task_id, d.phase)
        ids = [x.writing_id for x in bundle.drafts if (x.student_id, x.task_id, x.phase) == key]
        if len(ids) > 1 and key not in dup_keys:
            dup_keys.add(key)
            raise RecordParseError(
                f"writing_id not unique per (student, task, phase): {sorted(set(ids))} share {key}"
            )
    return bundle


def save_corpus(bundle: CorpusBundle, path: str | Path) -> None:
    """Serialize a bundle back to the JSONL wire format (drafts, suggestion
    sets, then grades, each in input order)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for d in bundle.drafts:
            fh.write(json.dumps({
                "writing_id": d.writing_id,
                "student_id": d.student_id,
                "teacher_id": d.teacher_id,
                "task_id": d.task_id,
                "school_id": d.school_id,
                "phase": d.phase,
                "text": d.text,
                "timestamp": d.timestamp,
            }, ensure_ascii=False) + "\n")
        for s in bundle.suggestion_sets:
            fh.write(json.dumps({
                "writing_id": s.writing_id,
                "stage": s.stage,
                "suggestions": [
                    {"suggestion_id": x.suggestion_id, "text": x.text}
                    if x.direction_tag is None
                    else {"suggestion_id": x.suggestion_id, "text": x.text,
                          "direction_tag": x.direction_tag}
                    for x in s.suggestions
                ],
            }, ensure_ascii=False) + "\n")
        for g in bundle.grades:
            fh.write(json.dumps({
                "writing_id": g.writing_id,
                "grader": g.grader,
                "phase": g.phase,
                "value": g.value,
            }, ensure_ascii=False) + "\n")
