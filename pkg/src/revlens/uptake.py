"""Feedback-uptake tracing.

Given the pre/post drafts and the raw vs finalized suggestion sets for one
writing, this module classifies each finalized suggestion's origin (kept
from the model vs teacher-authored), maps suggestions to pedagogical
dimensions by keyword, finds actively revised sentences, scores adoption
with a softmax attention over candidate cosines, and aggregates adoption
counts and rates by origin. Teacher workload accounting lives here too.
"""

from __future__ import annotations

import difflib
import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import Sentence, Suggestion, SuggestionSet
from .embeddings import cosine

ORIGIN_LLM = "L"
ORIGIN_TEACHER = "T"

DIMENSIONS = (
    "lexical_richness",
    "syntactic_diversity",
    "semantic_dispersion",
    "semantic_shift",
    "emotion_spectrum",
    "moral_alignment",
)
OTHER_DIMENSION = "other"

# Pedagogical-direction keywords per dimension; a suggestion keeps the
# first two distinct dimensions found (leading tag first), else "other".
DIMENSION_KEYWORDS: Mapping[str, tuple[str, ...]] = {
    "lexical_richness": ("Language", "Description", "Details"),
    "syntactic_diversity": ("Expression", "Transition"),
    "semantic_dispersion": ("Content", "Structure", "Persona"),
    "semantic_shift": ("Plot", "Opening", "Ending"),
    "emotion_spectrum": ("Psychology", "Emotion", "Environment", "Action"),
    "moral_alignment": ("Morals", "Material Selection", "Title", "Off-topic"),
}

DEFAULT_MATCH_THRESHOLD = 0.75      # origin: retained-from-model cutoff
DEFAULT_REVISION_THRESHOLD = 0.95   # candidate: unchanged-sentence cutoff
DEFAULT_ADOPTION_THRESHOLD = 0.5    # adopted: attention-score cutoff
DEFAULT_TEMPERATURE = 0.1

_KEYWORD_TO_DIM = {
    kw.lower(): dim for dim, kws in DIMENSION_KEYWORDS.items() for kw in kws
}
_KEYWORD_RE = re.compile(
    r"\b(" + "|".join(
        sorted((re.escape(kw) for kw in _KEYWORD_TO_DIM), key=len, reverse=True)
    ) + r")\b",
    re.IGNORECASE,
)
_LEADING_TAG_RE = re.compile(
    r"^\s*(" + "|".join(
        sorted((re.escape(kw) for kw in _KEYWORD_TO_DIM), key=len, reverse=True)
    ) + r")\s*[:：]",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class RevisionCandidate:
    sentence: Sentence
    max_similarity_to_pre: float


@dataclass(frozen=True)
class RevisionCandidateSet:
    writing_id: str
    candidates: tuple[RevisionCandidate, ...]
    threshold_used: float


@dataclass(frozen=True)
class SuggestionOutcome:
    suggestion_id: str
    origin: str
    dimensions: tuple[str, ...]
    match_score: float
    adopted: bool


@dataclass(frozen=True)
class UptakeThresholds:
    match: float = DEFAULT_MATCH_THRESHOLD
    revision: float = DEFAULT_REVISION_THRESHOLD
    adoption: float = DEFAULT_ADOPTION_THRESHOLD
    temperature: float = DEFAULT_TEMPERATURE


@dataclass(frozen=True)
class UptakeRecord:
    writing_id: str
    per_suggestion: tuple[SuggestionOutcome, ...]
    fua: int
    fur: float | None
    fua_l: int
    fua_t: int
    fur_l: float | None
    fur_t: float | None
    thresholds: UptakeThresholds


@dataclass(frozen=True)
class TeacherEffort:
    writing_id: str
    scenario: str                      # creation | modification
    per_dimension: dict[str, float]
    unclassified: float
    total: float


def classify_origin(
    s_final: Suggestion,
    s_initial_set: SuggestionSet | None,
    threshold: float,
    embedder,
) -> str:
    """Origin of a finalized suggestion: retained from the model (L) when
    its best cosine against the raw set strictly exceeds the threshold,
    teacher-authored (T) otherwise. An empty raw set means T."""
    initial = list(s_initial_set.suggestions) if s_initial_set else []
    if not initial:
        return ORIGIN_TEACHER
    vectors = embedder.embed_batch([s_final.text] + [s.text for s in initial])
    best = max(cosine(vectors[0], v) for v in vectors[1:])
    return ORIGIN_LLM if best > threshold else ORIGIN_TEACHER


def classify_dimension(suggestion: Suggestion) -> tuple[str, ...]:
    """Map a suggestion to up to two pedagogical dimensions.

    A leading `Keyword:` tag wins first place; the remaining text is then
    scanned left to right, and the first two distinct dimensions are kept.
    No keyword at all maps to ("other",).
    """
    text = suggestion.text
    if suggestion.direction_tag:
        text = f"{suggestion.direction_tag}: {text}"
    found: list[str] = []
    tag_match = _LEADING_TAG_RE.match(text)
    scan_from = 0
    if tag_match:
        found.append(_KEYWORD_TO_DIM[tag_match.group(1).lower()])
        scan_from = tag_match.end()
    for m in _KEYWORD_RE.finditer(text, scan_from):
        dim = _KEYWORD_TO_DIM[m.group(1).lower()]
        if dim not in found:
            found.append(dim)
        if len(found) == 2:
            break
    return tuple(found) if found else (OTHER_DIMENSION,)


def sequence_similarity(a: str, b: str) -> float:
    """Character-level match ratio 2M/(|a|+|b|) from recursive longest
    common substring matching (reference sequence-matcher semantics).
    Two empty strings are defined as identical."""
    if not a and not b:
        return 1.0
    return difflib.SequenceMatcher(None, a, b).ratio()


def revision_candidates(
    d_pre: Sequence[Sentence],
    d_post: Sequence[Sentence],
    threshold: float = DEFAULT_REVISION_THRESHOLD,
) -> RevisionCandidateSet:
    """Post-draft sentences whose best similarity to any pre-draft sentence
    is strictly below the threshold (the actively revised material). With
    an empty pre-draft every post sentence is a candidate."""
    writing_id = d_post[0].writing_id if d_post else (d_pre[0].writing_id if d_pre else "")
    candidates = []
    for sentence in d_post:
        best = max(
            (sequence_similarity(sentence.text, p.text) for p in d_pre), default=0.0
        )
        if best < threshold:
            candidates.append(RevisionCandidate(sentence, best))
    return RevisionCandidateSet(writing_id, tuple(candidates), threshold)


def attention_weights(cosines: Sequence[float], temperature: float) -> list[float]:
    """Softmax over candidate cosines at the given temperature, computed
    with max-subtraction for numerical stability."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if not cosines:
        return []
    peak = max(cosines)
    exps = [math.exp((c - peak) / temperature) for c in cosines]
    total = math.fsum(exps)  # exactly rounded: weights don't depend on order
    return [e / total for e in exps]


def attention_match(
    suggestion: Suggestion,
    candidates: RevisionCandidateSet,
    temperature: float,
    embedder,
) -> float:
    """Adoption score: attention-weighted mean of the suggestion-candidate
    cosines. No candidates means nothing was revised, so the score is 0."""
    if not candidates.candidates:
        return 0.0
    texts = [suggestion.text] + [c.sentence.text for c in candidates.candidates]
    vectors = embedder.embed_batch(texts)
    cosines = [cosine(vectors[0], v) for v in vectors[1:]]
    weights = attention_weights(cosines, temperature)
    return math.fsum(w * c for w, c in zip(weights, cosines))


def compute_uptake(
    s_final: SuggestionSet,
    origins: Mapping[str, str],
    dimensions: Mapping[str, tuple[str, ...]],
    candidates: RevisionCandidateSet,
    thresholds: UptakeThresholds,
    embedder,
) -> UptakeRecord:
    """Score every finalized suggestion and aggregate adoption by origin.

    A suggestion is adopted when its match score strictly exceeds the
    adoption threshold. Rates with empty denominators are None.
    """
    outcomes = []
    for s in s_final.suggestions:
        score = attention_match(s, candidates, thresholds.temperature, embedder)
        outcomes.append(
            SuggestionOutcome(
                suggestion_id=s.suggestion_id,
                origin=origins[s.suggestion_id],
                dimensions=tuple(dimensions[s.suggestion_id]),
                match_score=score,
                adopted=score > thresholds.adoption,
            )
        )
    n_final = len(outcomes)
    n_l = sum(1 for o in outcomes if o.origin == ORIGIN_LLM)
    n_t = n_final - n_l
    fua_l = sum(1 for o in outcomes if o.adopted and o.origin == ORIGIN_LLM)
    fua_t = sum(1 for o in outcomes if o.adopted and o.origin == ORIGIN_TEACHER)
    fua = fua_l + fua_t
    return UptakeRecord(
        writing_id=s_final.writing_id,
        per_suggestion=tuple(outcomes),
        fua=fua,
        fur=(fua / n_final) if n_final else None,
        fua_l=fua_l,
        fua_t=fua_t,
        fur_l=(fua_l / n_l) if n_l else None,
        fur_t=(fua_t / n_t) if n_t else None,
        thresholds=thresholds,
    )


def _spread_dimensions(per_dimension: dict[str, float], dims: Sequence[str]) -> float:
    """Add one suggestion's unit of effort to its dimensions, split
    equally; returns the amount that stayed unclassified."""
    real = [d for d in dims if d != OTHER_DIMENSION]
    if not real:
        return 1.0
    share = 1.0 / len(real)
    for d in real:
        per_dimension[d] += share
    return 0.0


def teacher_effort(
    s_initial: SuggestionSet | None,
    s_l_count: int,
    s_t_set: Sequence[Suggestion],
    writing_id: str = "",
    dropped_initial: Sequence[Suggestion] | None = None,
) -> TeacherEffort:
    """Teacher workload: discarded/revised raw suggestions plus manual
    additions.

    total = (|raw set| - retained count) + |teacher-authored set|. The
    per-dimension vector attributes teacher-authored suggestions (and, when
    the caller identifies them, dropped raw suggestions up to the
    arithmetic dropped count) via keyword classification; anything
    unattributable lands in the unclassified remainder.
    """
    n_initial = len(s_initial.suggestions) if s_initial else 0
    if s_l_count > n_initial:
        raise ValueError(
            f"retained count {s_l_count} exceeds raw suggestion count {n_initial}"
        )
    dropped_count = n_initial - s_l_count
    total = float(dropped_count + len(s_t_set))
    scenario = "creation" if n_initial == 0 else "modification"
    per_dimension = {d: 0.0 for d in DIMENSIONS}
    unclassified = 0.0
    for s in s_t_set:
        unclassified += _spread_dimensions(per_dimension, classify_dimension(s))
    attributed = list(dropped_initial or [])[:dropped_count]
    for s in attributed:
        unclassified += _spread_dimensions(per_dimension, classify_dimension(s))
    unclassified += dropped_count - len(attributed)
    wid = writing_id or (s_initial.writing_id if s_initial else "")
    return TeacherEffort(
        writing_id=wid,
        scenario=scenario,
        per_dimension=per_dimension,
        unclassified=unclassified,
        total=total,
    )
