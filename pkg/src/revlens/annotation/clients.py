"""LLM client interface, HTTP implementation, and the deterministic mock.

The wire contract is POST {role, prompt, payload_tsv} -> {tsv}. The mock
client is the test and acceptance backend: its labels and confidences are
content-hash functions of the sentence text, so any rerun or resume
reproduces identical outputs; transient failures are injected per call
from a per-payload attempt counter, while poisoned sentences fail
permanently at every batch size.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from typing import Callable

import httpx

from ..affect import labels_for

ROLES = ("agent_a", "agent_b", "filter")


class LlmError(Exception):
    pass


class LlmTransportError(LlmError):
    def __init__(self, message: str, attempts: int = 1):
        self.attempts = attempts
        super().__init__(message)


@dataclass(frozen=True)
class LlmClientConfig:
    endpoint: str = ""
    role: str = "agent_a"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 30.0
    backoff: float = 0.25

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.role in ("agent_a", "agent_b") and self.temperature != 0.0:
            raise ValueError("agent roles require temperature 0")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")


class HttpLlmClient:
    """Remote model endpoint speaking the {role, prompt, payload_tsv} contract."""

    def __init__(self, config: LlmClientConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._client = httpx.Client(timeout=config.timeout, transport=transport)

    def complete(self, role: str, prompt: str, payload_tsv: str) -> str:
        last_error = "unknown"
        for attempt in range(1, self.config.max_retries + 1):
            try:
                resp = self._client.post(
                    self.config.endpoint,
                    json={"role": role, "prompt": prompt, "payload_tsv": payload_tsv},
                )
                if resp.status_code != 200:
                    last_error = f"HTTP {resp.status_code}"
                else:
                    return resp.json()["tsv"]
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            if attempt < self.config.max_retries:
                time.sleep(self.config.backoff * (2 ** (attempt - 1)))
        raise LlmTransportError(
            f"model endpoint unreachable ({last_error})", self.config.max_retries
        )


def _hash64(seed: int, payload: str) -> int:
    digest = hashlib.sha256(f"{seed}|{payload}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class MockLlmClient:
    """Deterministic scripted model for tests and the acceptance suite.

    Labels depend only on (seed, task, sentence text). `fail_rate` injects
    transient transport failures drawn per (payload, attempt); sentences in
    `poisoned` make every containing batch fail; `bad_label_for` makes the
    final-stage reply for those sentences carry an out-of-set label
    (validation-failure path); `script` pins exact reply rows per
    (stage, wire_id) with stage one of filter/a1/b/a2.
    """

    task: str
    seed: int = 0
    fail_rate: float = 0.0
    poisoned: frozenset[str] = frozenset()          # sentence texts
    bad_label_for: frozenset[str] = frozenset()     # sentence texts
    relevance_fn: Callable[[str], bool] | None = None
    fail_batches_larger_than: int | None = None
    script: dict[tuple[str, str], str] = field(default_factory=dict)
    agree_rate: float = 0.75
    _attempts: dict[str, int] = field(default_factory=dict)

    def complete(self, role: str, prompt: str, payload_tsv: str) -> str:
        self._maybe_fail(role, payload_tsv)
        rows = [r for r in payload_tsv.split("\n") if r.strip()]
        out = []
        for row in rows:
            fields = row.split("\t")
            wire_id, text = fields[0], fields[1]
            if role == "filter":
                stage = "filter"
            elif role == "agent_b":
                stage = "b"
            else:
                stage = "a1" if len(fields) == 2 else "a2"
            scripted = self.script.get((stage, wire_id))
            if scripted is not None:
                out.append(scripted)
                continue
            if stage == "filter":
                out.append(f"{wire_id}\t{self._filter_decision(text)}")
            elif stage == "a1":
                label, conf = self._a1(text)
                out.append(f"{wire_id}\t{label}\t{conf:.2f}\tcue {label}")
            elif stage == "b":
                a1_label = fields[2]
                agree, suggested = self._b(text, a1_label)
                out.append(f"{wire_id}\t{agree}\tchecked against cues\t{suggested}")
            else:  # second annotator pass: payload carries first-pass + review fields
                a1_label, agree, suggested = fields[2], fields[5], fields[7]
                final = a1_label if agree == "y" else suggested
                if text in self.bad_label_for:
                    final = "not-a-label"
                conf = self._confidence(text, "final")
                out.append(f"{wire_id}\t{final}\t{conf:.2f}\tkept per review")
        return "\n".join(out)

    def _maybe_fail(self, role: str, payload_tsv: str) -> None:
        for text in self.poisoned:
            if f"\t{text}" in payload_tsv:
                raise LlmTransportError("injected permanent failure")
        n_rows = sum(1 for r in payload_tsv.split("\n") if r.strip())
        if self.fail_batches_larger_than is not None and n_rows > self.fail_batches_larger_than:
            raise LlmTransportError("injected size-limit failure")
        if self.fail_rate > 0.0:
            key = hashlib.sha256(f"{role}|{payload_tsv}".encode("utf-8")).hexdigest()
            attempt = self._attempts.get(key, 0) + 1
            self._attempts[key] = attempt
            draw = _hash64(self.seed, f"fail|{key}|{attempt}") / 2.0**64
            if draw < self.fail_rate:
                raise LlmTransportError("injected transient failure")

    def _filter_decision(self, text: str) -> str:
        if self.relevance_fn is not None:
            return "y" if self.relevance_fn(text) else "n"
        return "y" if _hash64(self.seed, f"rel|{self.task}|{text}") % 10 < 8 else "n"

    def _a1(self, text: str) -> tuple[str, float]:
        labels = labels_for(self.task)
        label = labels[_hash64(self.seed, f"a1|{self.task}|{text}") % len(labels)]
        return label, self._confidence(text, "a1")

    def _b(self, text: str, a1_label: str) -> tuple[str, str]:
        labels = labels_for(self.task)
        agree = (_hash64(self.seed, f"b|{self.task}|{text}") / 2.0**64) < self.agree_rate
        if agree:
            return "y", a1_label
        suggested = labels[_hash64(self.seed, f"bs|{self.task}|{text}") % len(labels)]
        return "n", suggested

    def _confidence(self, text: str, stage: str) -> float:
        return (50 + _hash64(self.seed, f"conf|{stage}|{text}") % 50) / 100.0
