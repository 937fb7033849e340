"""Pydantic request/response models for the analysis service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..config import RunConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class SegmentRequest(BaseModel):
    text: str = Field(..., min_length=1)
    writing_id: str = ""


class SentenceModel(BaseModel):
    writing_id: str
    sentence_id: int
    text: str


class SegmentResponse(BaseModel):
    sentences: list[SentenceModel]
    keep: list[bool]  # coarse-filter decision per sentence


class NormalizeGradeRequest(BaseModel):
    raw: float
    raw_min: float
    raw_max: float


class NormalizeGradeResponse(BaseModel):
    value: float


class EmbedRequest(BaseModel):
    texts: list[str] = Field(..., min_length=1)
    dim: Optional[int] = Field(None, gt=0)
    seed: Optional[int] = None


class EmbedResponse(BaseModel):
    vectors: list[list[float]]


class LexicalRequest(BaseModel):
    tokens: list[str] = Field(..., min_length=1)
    window: int = Field(50, ge=1)


class MetricResponse(BaseModel):
    value: float
    degenerate: bool = False


class SyntaxRequest(BaseModel):
    conllu: str
    iterations: int = Field(3, ge=0)


class CoherenceRequest(BaseModel):
    vectors: Optional[list[list[float]]] = None
    texts: Optional[list[str]] = None
    polarity: Literal["distance", "similarity"] = "distance"
    dim: Optional[int] = Field(None, gt=0)
    seed: Optional[int] = None


class CoherenceResponse(BaseModel):
    dispersion: float
    shift: float
    polarity: str
    degenerate: bool


class EntropyRequest(BaseModel):
    task: Literal["emotion", "moral"]
    labels: list[str]
    total_sentences: int = Field(..., gt=0)
    base: float = Field(2.0, gt=1.0)
    writing_id: str = ""


class EntropyResponse(BaseModel):
    counts: list[int]
    proportions: list[float]
    entropy: float


class DimensionRequest(BaseModel):
    text: str
    direction_tag: Optional[str] = None


class DimensionResponse(BaseModel):
    dimensions: list[str]


class SimilarityRequest(BaseModel):
    a: str
    b: str


class SimilarityResponse(BaseModel):
    value: float


class SuggestionModel(BaseModel):
    suggestion_id: str
    text: str
    direction_tag: Optional[str] = None


class UptakeRequest(BaseModel):
    writing_id: str = ""
    pre_text: str
    post_text: str
    initial: list[SuggestionModel] = []
    final: list[SuggestionModel] = Field(..., min_length=1)
    match_threshold: float = 0.75
    revision_threshold: float = 0.95
    adoption_threshold: float = 0.5
    temperature: float = Field(0.1, gt=0.0)
    dim: Optional[int] = Field(None, gt=0)
    seed: Optional[int] = None


class SuggestionOutcomeModel(BaseModel):
    suggestion_id: str
    origin: str
    dimensions: list[str]
    match_score: float
    adopted: bool


class UptakeResponse(BaseModel):
    writing_id: str
    per_suggestion: list[SuggestionOutcomeModel]
    fua: int
    fur: Optional[float]
    fua_l: int
    fua_t: int
    fur_l: Optional[float]
    fur_t: Optional[float]
    n_candidates: int


class ValidateTsvRequest(BaseModel):
    raw: str
    keys: list[str]  # wire ids, "writing_id:sentence_id"
    stage: Literal["filter", "a1", "b", "a2"]
    task: Literal["emotion", "moral"]


class ViolationModel(BaseModel):
    condition: str
    row: Optional[int]
    message: str


class ValidateTsvResponse(BaseModel):
    ok: bool
    violations: list[ViolationModel]


class LlmRequest(BaseModel):
    role: Literal["agent_a", "agent_b", "filter"]
    prompt: str
    payload_tsv: str


class LlmResponse(BaseModel):
    tsv: str


class CohenRequest(BaseModel):
    labels_a: list[str] = Field(..., min_length=1)
    labels_b: list[str] = Field(..., min_length=1)


class KappaResponse(BaseModel):
    kappa: Optional[float]
    degenerate: bool = False


class FleissRequest(BaseModel):
    label_matrix: list[list[str]] = Field(..., min_length=1)


class PairedTestRequest(BaseModel):
    pairs: list[tuple[float, float]] = Field(..., min_length=1)


class TwoSampleRequest(BaseModel):
    x: list[float] = Field(..., min_length=1)
    y: list[float] = Field(..., min_length=1)


class TestResultModel(BaseModel):
    statistic: float
    p_value: float
    method: str
    n: list[int]
    stars: str
    degenerate: bool


class QuartileRequest(BaseModel):
    items: list[tuple[str, float]] = Field(..., min_length=4)


class QuartileResponse(BaseModel):
    groups: dict[str, list[str]]
    cutpoints: tuple[float, float, float]
    degenerate: bool


class PanelRowModel(BaseModel):
    student_id: str
    teacher_id: str
    task_id: str
    dependent: float
    fua_l: int
    fua_t: int
    sfl_delta: list[float]
    baseline_score: float


class RegressionRequest(BaseModel):
    rows: list[PanelRowModel] = Field(..., min_length=2)
    regressors: list[str] = Field(..., min_length=1)


class RegressionResponse(BaseModel):
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    p_values: dict[str, float]
    r_squared: float
    n_obs: int
    df_resid: int
    fe_dims: list[str]


class PipelineRequest(BaseModel):
    config: RunConfig = RunConfig()
    task: Optional[Literal["emotion", "moral"]] = None


class PipelineResponse(BaseModel):
    command: str
    ok: bool
    outputs: dict[str, str]
    errors: list[str]
    warnings: list[str]
    summary: dict
    effective_config: RunConfig
