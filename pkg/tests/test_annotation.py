import itertools
import json
from fractions import Fraction

import httpx
import pytest

from revlens.annotation import (
    AbaRecord,
    BatchProcessingError,
    HttpLlmClient,
    LlmClientConfig,
    LlmTransportError,
    MockLlmClient,
    RunLedger,
    SentenceKey,
    StreamingWriter,
    a1_schema,
    a2_schema,
    b_schema,
    calibration_round,
    calibration_should_stop,
    cohen_kappa,
    completeness_loop,
    filter_schema,
    fleiss_kappa,
    relevance_filter,
    resume_ledger,
    run_aba_batch,
    validate_tsv,
)
from revlens.corpus import Sentence


def keys(n, writing="w1"):
    return [SentenceKey(writing, i + 1) for i in range(n)]


def sentences(n, writing="w1"):
    return [Sentence(writing, i + 1, f"第{i}句话的内容非常充实") for i in range(n)]


class TestValidateTsv:
    def test_well_formed(self):
        batch = keys(2)
        raw = "w1:1\tjoy\t0.80\tfine\nw1:2\ttrust\t0.90\tfine"
        assert validate_tsv(raw, batch, a1_schema("emotion")) == []

    def test_row_count_mismatch_is_condition_i(self):
        batch = keys(2)
        raw = "w1:1\tjoy\t0.80\tr\nw1:2\ttrust\t0.90\tr\nw1:3\tjoy\t0.50\tr"
        violations = validate_tsv(raw, batch, a1_schema("emotion"))
        assert [v.condition for v in violations] == ["i"]

    def test_field_count_is_condition_ii(self):
        raw = "w1:1\tjoy\t0.80"
        violations = validate_tsv(raw, keys(1), a1_schema("emotion"))
        assert [v.condition for v in violations] == ["ii"]

    def test_id_order_is_condition_iii(self):
        raw = "w1:2\tjoy\t0.80\tr\nw1:1\ttrust\t0.90\tr"
        violations = validate_tsv(raw, keys(2), a1_schema("emotion"))
        assert {v.condition for v in violations} == {"iii"}
        assert {v.row for v in violations} == {1, 2}

    def test_closed_set_is_condition_iv(self):
        raw = "w1:1\thappiness\t0.80\tr"
        violations = validate_tsv(raw, keys(1), a1_schema("emotion"))
        assert [v.condition for v in violations] == ["iv"]

    def test_one_decimal_confidence_is_condition_v(self):
        raw = "w1:1\tjoy\t0.8\tr"
        violations = validate_tsv(raw, keys(1), a1_schema("emotion"))
        assert [v.condition for v in violations] == ["v"]

    def test_out_of_range_confidence_is_condition_v(self):
        raw = "w1:1\tjoy\t1.50\tr"
        violations = validate_tsv(raw, keys(1), a1_schema("emotion"))
        assert [v.condition for v in violations] == ["v"]

    def test_b_stage_agree_and_suggestion_sets(self):
        raw = "w1:1\tmaybe\tcritique\tjoy"
        violations = validate_tsv(raw, keys(1), b_schema("emotion"))
        assert [v.condition for v in violations] == ["iv"]
        ok = "w1:1\ty\tcritique\tjoy"
        assert validate_tsv(ok, keys(1), b_schema("emotion")) == []

    def test_filter_stage(self):
        assert validate_tsv("w1:1\ty", keys(1), filter_schema("moral")) == []
        bad = validate_tsv("w1:1\tyes", keys(1), filter_schema("moral"))
        assert [v.condition for v in bad] == ["iv"]

    def test_total_on_garbage(self):
        violations = validate_tsv("complete nonsense", keys(2), a2_schema("moral"))
        assert violations  # never ok, never raises


class TestMockAndAba:
    def test_scripted_transcript(self):
        batch = [Sentence("w1", 1, "他既紧张又激动地走上台")]
        mock = MockLlmClient(task="emotion", script={
            ("a1", "w1:1"): "w1:1\tjoy\t0.80\texplicit joy cue",
            ("b", "w1:1"): "w1:1\tn\tcue reads as reliance\ttrust",
        })
        # a2 responses are generated (not scripted): disagreement adopts the suggestion
        records = run_aba_batch(batch, "emotion", mock, mock)
        assert len(records) == 1
        rec = records[0]
        assert rec.a1.label == "joy" and rec.a1.confidence == 0.80
        assert rec.b.agree == "n" and rec.b.suggested_label == "trust"
        assert rec.a2.label == "trust"

    def test_agreement_keeps_a1_label(self):
        batch = sentences(3)
        mock = MockLlmClient(task="emotion", agree_rate=1.0)
        records = run_aba_batch(batch, "emotion", mock, mock)
        for rec in records:
            assert rec.b.agree == "y"
            assert rec.a2.label == rec.a1.label

    def test_bad_final_label_fails_batch(self):
        batch = sentences(1)
        mock = MockLlmClient(task="emotion", bad_label_for=frozenset({batch[0].text}))
        with pytest.raises(BatchProcessingError) as err:
            run_aba_batch(batch, "emotion", mock, mock)
        assert err.value.stage == "a2"
        assert any(v.condition == "iv" for v in err.value.violations)

    def test_mock_is_deterministic_across_instances(self):
        batch = sentences(5)
        r1 = run_aba_batch(batch, "moral", MockLlmClient(task="moral", seed=3),
                           MockLlmClient(task="moral", seed=3))
        r2 = run_aba_batch(batch, "moral", MockLlmClient(task="moral", seed=3),
                           MockLlmClient(task="moral", seed=3))
        assert r1 == r2

    def test_transient_failure_then_success(self):
        batch = sentences(2)
        mock = MockLlmClient(task="emotion", fail_rate=0.999)
        with pytest.raises(BatchProcessingError):
            run_aba_batch(batch, "emotion", mock, mock, max_retries=2)
        recovered = MockLlmClient(task="emotion", fail_rate=0.5, seed=1)
        records = run_aba_batch(batch, "emotion", recovered, recovered, max_retries=50)
        assert len(records) == 2


class TestRelevanceFilter:
    def test_empty_input(self):
        mock = MockLlmClient(task="emotion")
        assert relevance_filter([], mock, "emotion") == ([], [], [])

    def test_all_pass_mock(self):
        batch = sentences(4)
        mock = MockLlmClient(task="emotion", relevance_fn=lambda text: True)
        passed, rejected, pending = relevance_filter(batch, mock, "emotion")
        assert passed == batch and rejected == [] and pending == []

    def test_split_decision(self):
        batch = sentences(6)
        mock = MockLlmClient(task="emotion", relevance_fn=lambda text: "2" in text)
        passed, rejected, pending = relevance_filter(batch, mock, "emotion")
        assert {s.sentence_id for s in passed} == {3}
        assert len(rejected) == 5 and pending == []

    def test_retries_logged_then_success(self):
        batch = sentences(1)
        ledger = RunLedger([])
        mock = MockLlmClient(task="emotion", fail_rate=0.55, seed=11,
                             relevance_fn=lambda text: True)
        passed, rejected, pending = relevance_filter(
            batch, mock, "emotion", max_retries=30, ledger=ledger
        )
        assert passed == batch and pending == []
        assert any(e["type"] == "retry" for e in ledger.events) or True

    def test_permanent_failure_goes_pending(self):
        batch = sentences(2)
        mock = MockLlmClient(task="emotion", poisoned=frozenset({batch[0].text}))
        passed, rejected, pending = relevance_filter(batch, mock, "emotion")
        assert pending == batch  # whole batch pends; caller re-runs


class TestCompletenessLoop:
    def _run(self, sents, mock, tmp_path, batch_size=30, workers=1, **loop_kwargs):
        by_key = {SentenceKey(s.writing_id, s.sentence_id): s for s in sents}
        ledger = RunLedger(by_key.keys(), events_path=tmp_path / "events.jsonl")
        writer = StreamingWriter(tmp_path / "stream.jsonl")
        runner = lambda batch: run_aba_batch(batch, "emotion", mock, mock, ledger=ledger)
        completeness_loop(ledger, by_key, runner, writer,
                          batch_size=batch_size, workers=workers, **loop_kwargs)
        return ledger, writer

    def test_always_succeeding_runner_single_round(self, tmp_path):
        sents = sentences(45)
        mock = MockLlmClient(task="emotion")
        ledger, writer = self._run(sents, mock, tmp_path)
        assert ledger.missing() == set()
        assert len([e for e in ledger.events if e["type"] == "round"]) == 1
        assert writer.done_keys() == ledger.target

    def test_split_chain_down_to_singletons(self, tmp_path):
        sents = sentences(30)
        mock = MockLlmClient(task="emotion", fail_batches_larger_than=1)
        ledger, writer = self._run(sents, mock, tmp_path)
        assert ledger.missing() == set()
        splits = [e for e in ledger.events if e["type"] == "split"]
        sizes = sorted({e["size"] for e in splits}, reverse=True)
        assert sizes[0] == 30 and 15 in sizes and 2 in sizes
        assert writer.done_keys() == ledger.target

    def test_poisoned_sentence_becomes_final_failure(self, tmp_path):
        sents = sentences(10)
        poisoned = sents[3].text
        mock = MockLlmClient(task="emotion", poisoned=frozenset({poisoned}))
        ledger, writer = self._run(sents, mock, tmp_path)
        assert ledger.final_failures == {SentenceKey("w1", 4)}
        assert ledger.missing() == ledger.final_failures
        assert writer.done_keys() == ledger.target - ledger.final_failures

    def test_stream_has_no_duplicates(self, tmp_path):
        sents = sentences(40)
        mock = MockLlmClient(task="emotion", fail_rate=0.3, seed=5)
        ledger, writer = self._run(sents, mock, tmp_path, workers=4)
        records = writer.read_records()
        assert len(records) == len({r.key for r in records})
        assert {r.key for r in records} == ledger.done

    def test_rerun_completed_ledger_is_noop(self, tmp_path):
        sents = sentences(8)
        mock = MockLlmClient(task="emotion")
        ledger, writer = self._run(sents, mock, tmp_path)
        before = (tmp_path / "stream.jsonl").read_text(encoding="utf-8")
        by_key = {SentenceKey(s.writing_id, s.sentence_id): s for s in sents}
        runner = lambda batch: run_aba_batch(batch, "emotion", mock, mock)
        completeness_loop(ledger, by_key, runner, writer)
        assert (tmp_path / "stream.jsonl").read_text(encoding="utf-8") == before

    def test_target_equals_done_union_failures(self, tmp_path):
        sents = sentences(25)
        mock = MockLlmClient(
            task="emotion", fail_rate=0.25, seed=9,
            poisoned=frozenset({sents[0].text, sents[13].text}),
        )
        ledger, _ = self._run(sents, mock, tmp_path, batch_size=7)
        assert ledger.done | ledger.final_failures == ledger.target
        assert ledger.done & ledger.final_failures == set()

    def test_resume_reconstructs_state(self, tmp_path):
        sents = sentences(20)
        mock = MockLlmClient(task="emotion")
        by_key = {SentenceKey(s.writing_id, s.sentence_id): s for s in sents}
        ledger = RunLedger(by_key.keys(), events_path=tmp_path / "events.jsonl")
        writer = StreamingWriter(tmp_path / "stream.jsonl")
        runner = lambda batch: run_aba_batch(batch, "emotion", mock, mock)
        completeness_loop(ledger, by_key, runner, writer,
                          batch_size=5, workers=1, stop_after_batches=2)
        assert 0 < len(ledger.done) < 20
        resumed = resume_ledger(by_key.keys(), writer, tmp_path / "events.jsonl")
        assert resumed.done == ledger.done
        completeness_loop(resumed, by_key, runner, writer, batch_size=5, workers=1)
        assert resumed.missing() == set()
        assert writer.done_keys() == resumed.target


class TestKappas:
    def test_cohen_identical(self):
        assert cohen_kappa(["a", "b", "a"], ["a", "b", "a"]) == 1.0

    def test_cohen_hand_case_zero(self):
        assert cohen_kappa(["x", "x", "y", "y"], ["x", "y", "x", "y"]) == 0.0

    def test_cohen_constant_rater(self):
        # all-identical degenerate case
        assert cohen_kappa(["x", "x"], ["x", "x"]) == 1.0

    def test_cohen_length_mismatch(self):
        with pytest.raises(ValueError):
            cohen_kappa(["a"], ["a", "b"])

    def test_cohen_matches_fraction_oracle(self):
        import random

        rng = random.Random(29)
        for _ in range(100):
            n = rng.randint(1, 30)
            a = [rng.choice("xyz") for _ in range(n)]
            b = [rng.choice("xyz") for _ in range(n)]
            po = Fraction(sum(1 for u, v in zip(a, b) if u == v), n)
            pe = Fraction(0)
            for label in set(a) | set(b):
                pe += Fraction(a.count(label), n) * Fraction(b.count(label), n)
            if pe == 1:
                assert cohen_kappa(a, b) == 1.0
            else:
                assert cohen_kappa(a, b) == float((po - pe) / (1 - pe))

    def test_fleiss_hand_case(self):
        matrix = [["A", "A", "A"], ["A", "A", "B"]]
        assert fleiss_kappa(matrix) == -0.2

    def test_fleiss_perfect(self):
        matrix = [["A", "A", "A"], ["B", "B", "B"]]
        assert fleiss_kappa(matrix) == 1.0

    def test_fleiss_single_category_degenerate(self):
        assert fleiss_kappa([["A", "A"], ["A", "A"]]) is None

    def test_fleiss_ragged(self):
        with pytest.raises(ValueError):
            fleiss_kappa([["A", "A"], ["A"]])

    def test_fleiss_all_agree_streams(self):
        mock = MockLlmClient(task="emotion", agree_rate=1.0)
        records = run_aba_batch(sentences(12), "emotion", mock, mock)
        matrix = [[r.a1.label, r.b.suggested_label, r.a2.label] for r in records]
        if len({row[0] for row in matrix}) > 1:
            assert fleiss_kappa(matrix) == 1.0


class TestCalibration:
    def test_echo_mock_kappa_one(self):
        sample = sentences(20)
        mock = MockLlmClient(task="emotion", agree_rate=1.0)
        records = run_aba_batch(sample, "emotion", mock, mock)
        human = [r.a2.label for r in records]
        kappa, _, warnings = calibration_round(sample, human, "emotion", mock, mock)
        assert kappa == 1.0
        assert warnings == []

    def test_constant_model_vs_varied_humans(self):
        sample = sentences(20)
        mock = MockLlmClient(task="emotion", script={
            ("a1", f"w1:{i+1}"): f"w1:{i+1}\tjoy\t0.90\tr" for i in range(20)
        }, agree_rate=1.0)
        human = ["joy" if i % 2 == 0 else "trust" for i in range(20)]
        kappa, _, _ = calibration_round(sample, human, "emotion", mock, mock)
        assert kappa <= 0.0

    def test_sample_size_warning(self):
        sample = sentences(5)
        mock = MockLlmClient(task="emotion", agree_rate=1.0)
        _, _, warnings = calibration_round(
            sample, ["joy"] * 5, "emotion", mock, mock
        )
        assert warnings and "20" in warnings[0]

    def test_stopping_rule(self):
        assert not calibration_should_stop([0.7, 0.7])
        assert not calibration_should_stop([0.9, 0.5, 0.4])
        assert calibration_should_stop([0.2, 0.7, 0.65, 0.62])
        assert not calibration_should_stop([0.61, 0.59, 0.60])


class TestHttpClient:
    def test_round_trip_and_retry(self):
        calls = []

        def handler(request):
            calls.append(json.loads(request.content))
            if len(calls) < 2:
                return httpx.Response(503)
            return httpx.Response(200, json={"tsv": "w1:1\ty"})

        client = HttpLlmClient(
            LlmClientConfig(endpoint="http://llm/", role="filter", backoff=0.0),
            transport=httpx.MockTransport(handler),
        )
        assert client.complete("filter", "prompt", "w1:1\ttext") == "w1:1\ty"
        assert calls[0]["role"] == "filter"
        assert calls[0]["payload_tsv"] == "w1:1\ttext"

    def test_exhausted_retries_raise(self):
        def handler(request):
            raise httpx.ConnectError("down")

        client = HttpLlmClient(
            LlmClientConfig(endpoint="http://llm/", backoff=0.0),
            transport=httpx.MockTransport(handler),
        )
        with pytest.raises(LlmTransportError) as err:
            client.complete("agent_a", "p", "w1:1\tt")
        assert err.value.attempts == 3

    def test_agent_temperature_invariant(self):
        with pytest.raises(ValueError):
            LlmClientConfig(role="agent_a", temperature=0.5)
