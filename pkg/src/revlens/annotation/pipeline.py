"""Batch annotation orchestration.

Flow: coarse-filtered sentences pass a model relevance filter, then an
annotate-critique-revise loop (first pass, reviewer critique, final pass)
labels each one. Replies are validated before anything is written; a
completeness loop re-runs the missing key set, recursively halving failed
batches down to single sentences, until every key is either written or
recorded as a permanent failure. The run ledger is an append-only event
log that supports resuming an interrupted run.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from ..corpus import Sentence
from .clients import LlmError, LlmTransportError
from .tsv import (
    SentenceKey,
    TsvSchema,
    Violation,
    a1_schema,
    a2_schema,
    b_schema,
    filter_schema,
    validate_tsv,
)

DEFAULT_BATCH_SIZE = 30
DEFAULT_WORKERS = 5
DEFAULT_MAX_RETRIES = 3

_PROMPTS_DIR = Path(__file__).parent / "prompts"


def load_prompt(task: str, stage: str) -> str:
    """Prompt payloads are opaque resource files, one per (task, stage)."""
    path = _PROMPTS_DIR / f"{task}_{stage}.txt"
    return path.read_text(encoding="utf-8")


@dataclass(frozen=True)
class StageA:
    label: str
    confidence: float
    reason: str


@dataclass(frozen=True)
class StageB:
    agree: str
    critique: str
    suggested_label: str


@dataclass(frozen=True)
class AbaRecord:
    key: SentenceKey
    task: str
    a1: StageA
    b: StageB
    a2: StageA

    def to_json(self) -> dict:
        return {
            "writing_id": self.key.writing_id,
            "sentence_id": self.key.sentence_id,
            "task": self.task,
            "a1": {"label": self.a1.label, "confidence": self.a1.confidence, "reason": self.a1.reason},
            "b": {"agree": self.b.agree, "critique": self.b.critique,
                  "suggested_label": self.b.suggested_label},
            "a2": {"label": self.a2.label, "confidence": self.a2.confidence, "reason": self.a2.reason},
        }

    @classmethod
    def from_json(cls, rec: dict) -> "AbaRecord":
        return cls(
            key=SentenceKey(rec["writing_id"], int(rec["sentence_id"])),
            task=rec["task"],
            a1=StageA(rec["a1"]["label"], rec["a1"]["confidence"], rec["a1"]["reason"]),
            b=StageB(rec["b"]["agree"], rec["b"]["critique"], rec["b"]["suggested_label"]),
            a2=StageA(rec["a2"]["label"], rec["a2"]["confidence"], rec["a2"]["reason"]),
        )


class BatchProcessingError(Exception):
    """A batch failed a stage after exhausting retries."""

    def __init__(self, stage: str, detail: str, violations: Sequence[Violation] = ()):
        self.stage = stage
        self.violations = tuple(violations)
        super().__init__(f"stage {stage}: {detail}")


class RunLedger:
    """Target/done/failed key accounting plus an append-only event log."""

    def __init__(self, target: Iterable[SentenceKey], events_path: str | Path | None = None):
        self.target: set[SentenceKey] = set(target)
        self.done: set[SentenceKey] = set()
        self.final_failures: set[SentenceKey] = set()
        self.events: list[dict] = []
        self._events_path = Path(events_path) if events_path else None
        self._lock = threading.Lock()

    def missing(self) -> set[SentenceKey]:
        return self.target - self.done

    def workable(self) -> set[SentenceKey]:
        return self.target - self.done - self.final_failures

    def log(self, event_type: str, **fields) -> None:
        event = {"type": event_type, **fields}
        with self._lock:
            self.events.append(event)
            if self._events_path is not None:
                with self._events_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")

    def mark_done(self, keys: Iterable[SentenceKey]) -> None:
        with self._lock:
            self.done.update(keys)

    def mark_final_failure(self, key: SentenceKey) -> None:
        with self._lock:
            self.final_failures.add(key)
        self.log("final_failure", key=key.wire())


class StreamingWriter:
    """Serialized appender for validated records; one JSON line per record,
    whole batches appended atomically."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, records: Sequence[AbaRecord]) -> None:
        payload = "".join(
            json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n"
            for r in records
        )
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(payload)
                fh.flush()

    def read_records(self) -> list[AbaRecord]:
        if not self.path.exists():
            return []
        records = []
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(AbaRecord.from_json(json.loads(line)))
        return records

    def done_keys(self) -> set[SentenceKey]:
        return {r.key for r in self.read_records()}


def _key_of(sentence: Sentence) -> SentenceKey:
    return SentenceKey(sentence.writing_id, sentence.sentence_id)


def _call_validated(
    client,
    role: str,
    prompt: str,
    payload: str,
    keys: Sequence[SentenceKey],
    schema: TsvSchema,
    max_retries: int,
    ledger: RunLedger | None,
) -> list[list[str]]:
    """Invoke a client with retries until the reply validates; returns the
    parsed rows. Raises BatchProcessingError after exhausting retries."""
    last: str = "no attempt made"
    violations: Sequence[Violation] = ()
    for attempt in range(1, max_retries + 1):
        try:
            raw = client.complete(role, prompt, payload)
        except LlmError as exc:
            last = f"transport failure: {exc}"
            if ledger:
                ledger.log("retry", stage=schema.stage, attempt=attempt, reason=str(exc))
            continue
        violations = validate_tsv(raw, keys, schema)
        if not violations:
            return [line.split("\t") for line in raw.split("\n") if line.strip()]
        last = f"validation failure ({violations[0].condition}): {violations[0].message}"
        if ledger:
            ledger.log(
                "validation_failure",
                stage=schema.stage,
                attempt=attempt,
                conditions=sorted({v.condition for v in violations}),
            )
    if ledger:
        ledger.log("retry_exhausted", stage=schema.stage, detail=last)
    raise BatchProcessingError(schema.stage, last, violations)


def relevance_filter(
    sentences: Sequence[Sentence],
    client,
    task: str,
    max_retries: int = DEFAULT_MAX_RETRIES,
    ledger: RunLedger | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> tuple[list[Sentence], list[Sentence], list[Sentence]]:
    """Binary relevance triage. Returns (passed, rejected, pending); a
    batch that fails after retries lands in pending for a later re-run
    rather than being silently rejected."""
    passed: list[Sentence] = []
    rejected: list[Sentence] = []
    pending: list[Sentence] = []
    prompt = load_prompt(task, "filter")
    schema = filter_schema(task)
    for start in range(0, len(sentences), batch_size):
        batch = list(sentences[start : start + batch_size])
        keys = [_key_of(s) for s in batch]
        payload = "\n".join(f"{k.wire()}\t{s.text}" for k, s in zip(keys, batch))
        try:
            rows = _call_validated(
                client, "filter", prompt, payload, keys, schema, max_retries, ledger
            )
        except BatchProcessingError:
            pending.extend(batch)
            continue
        for sentence, fields in zip(batch, rows):
            decision = fields[1]
            (passed if decision == "y" else rejected).append(sentence)
            if ledger:
                ledger.log("filter", key=_key_of(sentence).wire(), decision=decision)
    return passed, rejected, pending


def run_aba_batch(
    batch: Sequence[Sentence],
    task: str,
    agent_a,
    agent_b,
    max_retries: int = DEFAULT_MAX_RETRIES,
    ledger: RunLedger | None = None,
) -> list[AbaRecord]:
    """Run the three-stage loop on one batch and assemble records.

    Each stage's reply must validate before the next stage runs; any stage
    exhausting retries raises BatchProcessingError so the caller can split
    the batch.
    """
    if not batch:
        return []
    keys = [_key_of(s) for s in batch]

    a1_payload = "\n".join(f"{k.wire()}\t{s.text}" for k, s in zip(keys, batch))
    a1_rows = _call_validated(
        agent_a, "agent_a", load_prompt(task, "a1"), a1_payload,
        keys, a1_schema(task), max_retries, ledger,
    )

    b_payload = "\n".join(
        f"{k.wire()}\t{s.text}\t{row[1]}\t{row[2]}\t{row[3]}"
        for k, s, row in zip(keys, batch, a1_rows)
    )
    b_rows = _call_validated(
        agent_b, "agent_b", load_prompt(task, "b"), b_payload,
        keys, b_schema(task), max_retries, ledger,
    )

    a2_payload = "\n".join(
        f"{k.wire()}\t{s.text}\t{a1[1]}\t{a1[2]}\t{a1[3]}\t{b[1]}\t{b[2]}\t{b[3]}"
        for k, s, a1, b in zip(keys, batch, a1_rows, b_rows)
    )
    a2_rows = _call_validated(
        agent_a, "agent_a", load_prompt(task, "a2"), a2_payload,
        keys, a2_schema(task), max_retries, ledger,
    )

    return [
        AbaRecord(
            key=key,
            task=task,
            a1=StageA(a1[1], float(a1[2]), a1[3]),
            b=StageB(b[1], b[2], b[3]),
            a2=StageA(a2[1], float(a2[2]), a2[3]),
        )
        for key, a1, b, a2 in zip(keys, a1_rows, b_rows, a2_rows)
    ]


def completeness_loop(
    ledger: RunLedger,
    sentences_by_key: dict[SentenceKey, Sentence],
    runner: Callable[[list[Sentence]], list[AbaRecord]],
    writer: StreamingWriter,
    batch_size: int = DEFAULT_BATCH_SIZE,
    workers: int = DEFAULT_WORKERS,
    max_rounds: int = 25,
    stop_after_batches: int | None = None,
) -> RunLedger:
    """Re-run the missing key set until it is empty or only permanent
    failures remain.

    A failed batch is recursively halved; a failing singleton becomes a
    final failure and is skipped in later rounds. `stop_after_batches`
    aborts mid-run (used to exercise resume behavior).
    """
    batches_run = 0

    class _Stop(Exception):
        pass

    def process(batch: list[Sentence]) -> None:
        nonlocal batches_run
        if stop_after_batches is not None and batches_run >= stop_after_batches:
            raise _Stop()
        batches_run += 1
        keys = [_key_of(s) for s in batch]
        try:
            records = runner(batch)
        except BatchProcessingError as exc:
            ledger.log("batch_failure", size=len(batch), stage=exc.stage)
            if len(batch) == 1:
                ledger.mark_final_failure(keys[0])
                return
            mid = (len(batch) + 1) // 2
            ledger.log("split", size=len(batch), into=[mid, len(batch) - mid])
            process(batch[:mid])
            process(batch[mid:])
            return
        writer.append(records)
        ledger.mark_done(keys)
        ledger.log("batch_ok", size=len(batch))

    rounds = 0
    try:
        while ledger.workable() and rounds < max_rounds:
            rounds += 1
            ledger.log("round", number=rounds, missing=len(ledger.missing()))
            ordered = sorted(ledger.workable(), key=lambda k: (k.writing_id, k.sentence_id))
            batches = [
                [sentences_by_key[k] for k in ordered[i : i + batch_size]]
                for i in range(0, len(ordered), batch_size)
            ]
            if workers > 1 and stop_after_batches is None:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    list(pool.map(process, batches))
            else:
                for batch in batches:
                    process(batch)
    except _Stop:
        ledger.log("interrupted", after_batches=batches_run)
    return ledger


def resume_ledger(
    target: Iterable[SentenceKey],
    writer: StreamingWriter,
    events_path: str | Path | None = None,
) -> RunLedger:
    """Rebuild ledger state from the streaming output plus the persisted
    event log, so an interrupted run can continue where it stopped."""
    ledger = RunLedger(target, events_path=events_path)
    ledger.done = writer.done_keys() & ledger.target
    if events_path is not None and Path(events_path).exists():
        with Path(events_path).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event.get("type") == "final_failure":
                    ledger.final_failures.add(SentenceKey.from_wire(event["key"]))
    ledger.log("resume", done=len(ledger.done), failures=len(ledger.final_failures))
    return ledger


def calibration_round(
    sample: Sequence[Sentence],
    human_labels: Sequence[str],
    task: str,
    agent_a,
    agent_b,
    max_retries: int = DEFAULT_MAX_RETRIES,
    expected_size: int = 20,
) -> tuple[float, list[AbaRecord], list[str]]:
    """One prompt-calibration pass: classify the sample once, align final
    labels with the human labels, and return (kappa, records, warnings)."""
    from .agreement import cohen_kappa

    warnings: list[str] = []
    if len(sample) != expected_size:
        warnings.append(f"calibration sample has {len(sample)} sentences, expected {expected_size}")
    if len(sample) != len(human_labels):
        raise ValueError("sample and human label counts differ")
    records = run_aba_batch(sample, task, agent_a, agent_b, max_retries=max_retries)
    kappa = cohen_kappa(list(human_labels), [r.a2.label for r in records])
    return kappa, records, warnings


def calibration_should_stop(kappas: Sequence[float], window: int = 3, threshold: float = 0.6) -> bool:
    """Stop once the mean of the last `window` rounds exceeds the threshold."""
    if len(kappas) < window:
        return False
    recent = kappas[-window:]
    return sum(recent) / window > threshold
