"""Run configuration: one JSON document, defaults for every field.

Flag overrides from the CLI win over file values; the effective (fully
defaulted) configuration is echoed into every command's output directory
so runs are reproducible from their artifacts alone.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, model_validator


class Thresholds(BaseModel):
    match: float = Field(0.75, ge=-1.0, le=1.0)       # origin: retained-vs-authored cosine cutoff
    revision: float = Field(0.95, ge=0.0, le=1.0)     # candidate: unchanged-sentence similarity cutoff
    adoption: float = Field(0.5, ge=-1.0, le=1.0)     # adopted: attention-score cutoff
    temperature: float = Field(0.1, gt=0.0)           # attention softmax temperature


class EmbeddingSettings(BaseModel):
    backend: Literal["deterministic", "file", "http"] = "deterministic"
    location: str = ""
    dim: int = Field(64, gt=0)
    timeout: float = Field(10.0, gt=0.0)
    max_batch: int = Field(64, ge=1)


class LlmSettings(BaseModel):
    mock: bool = True
    endpoint: str = ""
    temperature: float = 0.0
    max_retries: int = Field(3, ge=1)
    timeout: float = Field(30.0, gt=0.0)
    mock_fail_rate: float = Field(0.0, ge=0.0, lt=1.0)
    mock_relevance_pass_all: bool = True

    @model_validator(mode="after")
    def _check_endpoint(self):
        if not self.mock and not self.endpoint:
            raise ValueError("non-mock llm settings require an endpoint")
        return self


class PathSettings(BaseModel):
    corpus: str = "corpus.jsonl"
    conllu_dir: str = "conllu"
    vectors: str = ""
    emotion_labels: str = ""
    moral_labels: str = ""
    out_dir: str = "out"


class RunConfig(BaseModel):
    thresholds: Thresholds = Thresholds()
    mattr_window: int = Field(50, ge=1)
    wl_iterations: int = Field(3, ge=0)
    entropy_base: float = Field(2.0, gt=1.0)
    trim_fraction: float = Field(0.025, ge=0.0, lt=0.5)
    coherence_polarity: Literal["distance", "similarity"] = "distance"
    embedding: EmbeddingSettings = EmbeddingSettings()
    llm: LlmSettings = LlmSettings()
    workers: int = Field(5, ge=1)
    batch_size: int = Field(30, ge=1)
    max_retries: int = Field(3, ge=1)
    paths: PathSettings = PathSettings()
    seed: int = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with Path(path).open("r", encoding="utf-8") as fh:
            return cls.model_validate(json.load(fh))

    def effective_json(self) -> str:
        return json.dumps(self.model_dump(), indent=2, sort_keys=True, ensure_ascii=False)
