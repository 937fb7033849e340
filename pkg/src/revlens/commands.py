"""Batch command drivers behind the service's pipeline endpoints.

Each driver consumes a RunConfig, reads its inputs from the configured
paths, writes outputs atomically under the output directory, and returns
a manifest (outputs, errors, warnings, summary). Drivers are deterministic
given (config, seed) and the deterministic/mock backends.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import affect, corpus, lexical, syntax, uptake as uptake_mod
from .annotation import (
    HttpLlmClient,
    LlmClientConfig,
    MockLlmClient,
    RunLedger,
    StreamingWriter,
    completeness_loop,
    fleiss_kappa,
    relevance_filter,
    resume_ledger,
    run_aba_batch,
)
from .annotation.tsv import SentenceKey
from .coherence import semantic_dispersion, semantic_shift
from .config import RunConfig
from .embeddings import EmbeddingError, EmbeddingProviderConfig, make_provider
from .panel import PanelRow, RankDeficiencyError, fe_regression
from .reports import atomic_write, coefficient_cell, write_jsonl, write_table
from .stats import mann_whitney_u, star_label, quartile_split, spearman, wilcoxon_signed_rank

METRIC_NAMES = uptake_mod.DIMENSIONS  # canonical six-dimension order


@dataclass
class CommandResult:
    command: str
    outputs: dict[str, str] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "ok": self.ok,
            "outputs": self.outputs,
            "errors": self.errors,
            "warnings": self.warnings,
            "summary": self.summary,
        }


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _begin(config: RunConfig, command: str) -> tuple[Path, CommandResult]:
    out = _out_dir(config)
    atomic_write(out / "effective_config.json", config.effective_json() + "\n")
    return out, CommandResult(command=command)


def _finish(out: Path, result: CommandResult) -> CommandResult:
    if result.errors:
        atomic_write(
            out / "errors.json",
            json.dumps(
                {"command": result.command, "errors": result.errors},
                indent=2, sort_keys=True, ensure_ascii=False,
            ) + "\n",
        )
        result.outputs["errors"] = str(out / "errors.json")
    return result


def _provider(config: RunConfig):
    settings = config.embedding
    return make_provider(EmbeddingProviderConfig(
        backend=settings.backend,
        location=settings.location,
        dim=settings.dim,
        timeout=settings.timeout,
        max_batch=settings.max_batch,
        seed=config.seed,
    ))


def _load_bundle(out: Path, config: RunConfig, result: CommandResult):
    bundle_path = out / "bundle.jsonl"
    source = bundle_path if bundle_path.exists() else Path(config.paths.corpus)
    try:
        return corpus.load_corpus(source)
    except (OSError, corpus.CorpusError) as exc:
        result.errors.append(f"cannot load corpus bundle from {source}: {exc}")
        return None


# ---------------------------------------------------------------- ingest


def cmd_ingest(config: RunConfig) -> CommandResult:
    out, result = _begin(config, "ingest")
    try:
        bundle = corpus.load_corpus(config.paths.corpus)
    except (OSError, corpus.CorpusError) as exc:
        result.errors.append(f"ingest failed: {exc}")
        return _finish(out, result)

    kept = corpus.trim_outliers(bundle.drafts, config.trim_fraction)
    kept_ids = {d.writing_id for d in kept}
    trimmed = corpus.CorpusBundle(
        drafts=kept,
        suggestion_sets=[s for s in bundle.suggestion_sets if s.writing_id in kept_ids],
        grades=[g for g in bundle.grades if g.writing_id in kept_ids],
    )
    corpus.save_corpus(trimmed, out / "bundle.jsonl")
    result.outputs["bundle"] = str(out / "bundle.jsonl")

    sent_counts = [len(corpus.segment_sentences(d.text)) for d in trimmed.drafts]
    tok_counts = [len(corpus.tokenize(d.text)) for d in trimmed.drafts]
    pairs = trimmed.pairs()
    n = len(trimmed.drafts)
    rows = [
        ("time_span", "-"),
        ("n_schools", len({d.school_id for d in trimmed.drafts})),
        ("n_students", len({d.student_id for d in trimmed.drafts})),
        ("n_writing_tasks", len({d.task_id for d in trimmed.drafts})),
        ("n_total_essays", n),
        ("avg_sentences", (sum(sent_counts) / n) if n else 0.0),
        ("avg_tokens", (sum(tok_counts) / n) if n else 0.0),
        ("n_student_task_pairs", len(pairs)),
    ]
    for grader in corpus.GRADERS:
        paired = []
        for pre, post in pairs:
            g_pre = trimmed.grade_for(pre.writing_id, grader, "pre")
            g_post = trimmed.grade_for(post.writing_id, grader, "post")
            if g_pre and g_post:
                paired.append((g_pre.value, g_post.value))
        if paired:
            mean_pre = sum(v for v, _ in paired) / len(paired)
            mean_post = sum(v for _, v in paired) / len(paired)
            test = wilcoxon_signed_rank([(b, a) for a, b in paired])
            rows.append(
                (f"grade_{grader}_pre_vs_post",
                 f"{mean_pre:.2f} vs {mean_post:.2f} {test.stars}")
            )
    write_table(out / "ingest_stats.csv", ("statistic", "value"), rows)
    result.outputs["ingest_stats"] = str(out / "ingest_stats.csv")
    result.summary = {
        "essays": n,
        "trimmed_away": len(bundle.drafts) - n,
        "pairs": len(pairs),
    }
    return _finish(out, result)


# ---------------------------------------------------------------- metrics


def _final_label_path(out: Path, config: RunConfig, task: str) -> Path | None:
    configured = getattr(config.paths, f"{task}_labels")
    if configured:
        return Path(configured)
    default = out / "annotations" / f"{task}_final.tsv"
    return default if default.exists() else None


def _read_final_labels(path: Path) -> dict[str, list[str]]:
    labels: dict[str, list[str]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            writing_id, _, label, _ = line.split("\t")
            labels.setdefault(writing_id, []).append(label)
    return labels


def _metric_row(
    draft: corpus.EssayDraft,
    config: RunConfig,
    provider,
    task_labels: dict[str, dict[str, list[str]]],
    conllu_dir: Path,
) -> tuple[dict | None, str | None]:
    """Compute the six-metric profile for one draft; (row, skip_reason)."""
    tokens = corpus.tokenize(draft.text)
    if not tokens:
        return None, f"{draft.writing_id}: no tokens after tokenization"
    sentences = corpus.segment_sentences(draft.text, draft.writing_id)
    kept = [s for s in sentences if corpus.coarse_filter(s)]

    conllu_path = conllu_dir / f"{draft.writing_id}.conllu"
    if not conllu_path.exists():
        return None, f"{draft.writing_id}: missing dependency parse"
    try:
        graphs = syntax.parse_conllu(conllu_path.read_text(encoding="utf-8"))
    except syntax.ConlluParseError as exc:
        return None, f"{draft.writing_id}: bad dependency parse ({exc})"

    degenerate = []
    lex = lexical.mattr(tokens, config.mattr_window)
    syn = syntax.syntactic_diversity(graphs, config.wl_iterations)
    if syn.degenerate:
        degenerate.append("syntactic_diversity")

    if kept:
        try:
            vectors = provider.embed_batch([s.text for s in kept])
        except EmbeddingError as exc:
            return None, f"{draft.writing_id}: embedding failure ({exc})"
        dispersion = semantic_dispersion(vectors, config.coherence_polarity)
        shift = semantic_shift(vectors, config.coherence_polarity)
    else:
        from .metrics_base import MetricValue

        dispersion = MetricValue(0.0, degenerate=True)
        shift = MetricValue(0.0, degenerate=True)
    if dispersion.degenerate:
        degenerate.append("semantic_dispersion")
    if shift.degenerate:
        degenerate.append("semantic_shift")

    n_total = len(sentences)
    entropies = {}
    proportions = {}
    for task in affect.TASKS:
        labels = task_labels.get(task, {}).get(draft.writing_id, [])
        dist = affect.aggregate_labels(labels, max(n_total, 1), task, draft.writing_id)
        entropies[task] = affect.spectrum_entropy(dist, config.entropy_base)
        proportions[task] = dist.proportions

    row = {
        "writing_id": draft.writing_id,
        "student_id": draft.student_id,
        "teacher_id": draft.teacher_id,
        "task_id": draft.task_id,
        "phase": draft.phase,
        "metrics": {
            "lexical_richness": lex,
            "syntactic_diversity": syn.value,
            "semantic_dispersion": dispersion.value,
            "semantic_shift": shift.value,
            "emotion_spectrum": entropies["emotion"],
            "moral_alignment": entropies["moral"],
        },
        "category_proportions": {
            "emotion": list(proportions["emotion"]),
            "moral": list(proportions["moral"]),
        },
        "n_sentences": n_total,
        "degenerate": degenerate,
    }
    return row, None


def cmd_metrics(config: RunConfig) -> CommandResult:
    out, result = _begin(config, "metrics")
    bundle = _load_bundle(out, config, result)
    if bundle is None:
        return _finish(out, result)
    provider = _provider(config)

    task_labels: dict[str, dict[str, list[str]]] = {}
    for task in affect.TASKS:
        path = _final_label_path(out, config, task)
        if path is None:
            result.warnings.append(f"no {task} label file; {task} entropies use zero counts")
            task_labels[task] = {}
        else:
            task_labels[task] = _read_final_labels(path)

    conllu_dir = Path(config.paths.conllu_dir)
    rows = []
    by_writing: dict[str, dict] = {}
    for draft in bundle.drafts:
        row, skip = _metric_row(draft, config, provider, task_labels, conllu_dir)
        if row is None:
            result.warnings.append(f"skipped {skip}")
            continue
        rows.append(row)
        by_writing[row["writing_id"]] = row
    write_jsonl(out / "metrics.jsonl", rows)
    result.outputs["metrics"] = str(out / "metrics.jsonl")

    pair_rows = []
    for pre, post in bundle.pairs():
        if pre.writing_id in by_writing and post.writing_id in by_writing:
            pair_rows.append((by_writing[pre.writing_id], by_writing[post.writing_id]))

    delta_rows = []
    for name in METRIC_NAMES:
        pre_vals = [p["metrics"][name] for p, _ in pair_rows]
        post_vals = [q["metrics"][name] for _, q in pair_rows]
        if not pre_vals:
            continue
        mean_pre = sum(pre_vals) / len(pre_vals)
        mean_post = sum(post_vals) / len(post_vals)
        rel = [
            (b - a) / abs(a) * 100.0
            for a, b in zip(pre_vals, post_vals)
            if abs(a) > 1e-12
        ]
        delta_pct = sum(rel) / len(rel) if rel else 0.0
        test = wilcoxon_signed_rank(list(zip(post_vals, pre_vals)))
        delta_rows.append((name, mean_pre, mean_post, delta_pct, test.stars))
    write_table(
        out / "metric_deltas.csv",
        ("dimension", "mean_pre", "mean_post", "delta_pct", "stars"),
        delta_rows,
    )
    result.outputs["metric_deltas"] = str(out / "metric_deltas.csv")

    shift_rows = []
    groups = {
        "emotion": [("approach", affect.APPROACH_EMOTIONS), ("avoidance", affect.AVOIDANCE_EMOTIONS)],
        "moral": [("positive", affect.POSITIVE_MORALS), ("negative", affect.NEGATIVE_MORALS)],
    }
    for task in affect.TASKS:
        if not task_labels[task]:
            continue
        order = affect.labels_for(task)
        for group_name, members in groups[task]:
            for category in members:
                idx = order.index(category)
                pre_vals = [p["category_proportions"][task][idx] for p, _ in pair_rows]
                post_vals = [q["category_proportions"][task][idx] for _, q in pair_rows]
                if not pre_vals:
                    continue
                delta_pp = (sum(post_vals) - sum(pre_vals)) / len(pre_vals) * 100.0
                test = wilcoxon_signed_rank(list(zip(post_vals, pre_vals)))
                shift_rows.append((task, group_name, category, delta_pp, test.stars))
    if shift_rows:
        write_table(
            out / "affect_shifts.csv",
            ("task", "group", "category", "delta_pct_points", "stars"),
            shift_rows,
        )
        result.outputs["affect_shifts"] = str(out / "affect_shifts.csv")

    result.summary = {"essays_scored": len(rows), "pairs": len(pair_rows)}
    return _finish(out, result)


# ---------------------------------------------------------------- annotate


def _collect_sentences(bundle: corpus.CorpusBundle) -> list[corpus.Sentence]:
    collected = []
    for draft in bundle.drafts:
        for sentence in corpus.segment_sentences(draft.text, draft.writing_id):
            if corpus.coarse_filter(sentence):
                collected.append(sentence)
    return collected


def _make_clients(config: RunConfig, task: str):
    if config.llm.mock:
        mock = MockLlmClient(
            task=task,
            seed=config.seed,
            fail_rate=config.llm.mock_fail_rate,
            relevance_fn=(lambda text: True) if config.llm.mock_relevance_pass_all else None,
        )
        return mock, mock, mock
    client = HttpLlmClient(LlmClientConfig(
        endpoint=config.llm.endpoint,
        role="agent_a",
        temperature=config.llm.temperature,
        max_retries=config.llm.max_retries,
        timeout=config.llm.timeout,
    ))
    return client, client, client


def cmd_annotate(config: RunConfig, task: str) -> CommandResult:
    out, result = _begin(config, "annotate")
    if task not in affect.TASKS:
        result.errors.append(f"unknown annotation task {task!r}")
        return _finish(out, result)
    bundle = _load_bundle(out, config, result)
    if bundle is None:
        return _finish(out, result)
    filter_client, agent_a, agent_b = _make_clients(config, task)

    sentences = _collect_sentences(bundle)
    ann_dir = out / "annotations"
    ann_dir.mkdir(parents=True, exist_ok=True)
    stream_path = ann_dir / f"{task}_stream.jsonl"
    events_path = ann_dir / f"{task}_events.jsonl"
    writer = StreamingWriter(stream_path)

    passed = list(sentences)
    pending = passed
    accepted: list[corpus.Sentence] = []
    for _ in range(5):
        if not pending:
            break
        ok, _rejected, pending = relevance_filter(
            pending, filter_client, task, config.max_retries, batch_size=config.batch_size
        )
        accepted.extend(ok)
    if pending:
        result.errors.append(
            f"relevance filter could not score {len(pending)} sentence(s) after retries"
        )
    target = {SentenceKey(s.writing_id, s.sentence_id) for s in accepted}
    by_key = {SentenceKey(s.writing_id, s.sentence_id): s for s in accepted}

    if stream_path.exists() or events_path.exists():
        ledger = resume_ledger(target, writer, events_path)
        result.warnings.append("resumed from existing stream/event files")
    else:
        ledger = RunLedger(target, events_path=events_path)

    runner = lambda batch: run_aba_batch(
        batch, task, agent_a, agent_b, max_retries=config.max_retries, ledger=ledger
    )
    completeness_loop(
        ledger, by_key, runner, writer,
        batch_size=config.batch_size, workers=config.workers,
    )

    records = {r.key: r for r in writer.read_records() if r.key in ledger.done}
    ordered_keys = sorted(records, key=lambda k: (k.writing_id, k.sentence_id))
    tsv_lines = [
        f"{k.writing_id}\t{k.sentence_id}\t{records[k].a2.label}\t{records[k].a2.confidence:.2f}"
        for k in ordered_keys
    ]
    final_path = ann_dir / f"{task}_final.tsv"
    atomic_write(final_path, "\n".join(tsv_lines) + ("\n" if tsv_lines else ""))

    matrix = [
        [records[k].a1.label, records[k].b.suggested_label, records[k].a2.label]
        for k in ordered_keys
    ]
    kappa = fleiss_kappa(matrix) if matrix else None
    write_table(
        ann_dir / f"{task}_kappa.csv",
        ("task", "fleiss_kappa", "n_sentences", "final_failures"),
        [(task, kappa if kappa is not None else "degenerate",
          len(ordered_keys), len(ledger.final_failures))],
    )

    if ledger.final_failures:
        result.warnings.append(
            f"{len(ledger.final_failures)} sentence(s) recorded as permanent failures"
        )
    result.outputs.update({
        "final_labels": str(final_path),
        "stream": str(stream_path),
        "events": str(events_path),
        "kappa": str(ann_dir / f"{task}_kappa.csv"),
    })
    result.summary = {
        "task": task,
        "target": len(target),
        "done": len(ledger.done),
        "missing": len(ledger.missing() - ledger.final_failures),
        "final_failures": len(ledger.final_failures),
        "fleiss_kappa": kappa,
    }
    return _finish(out, result)


# ---------------------------------------------------------------- uptake


def cmd_uptake(config: RunConfig) -> CommandResult:
    out, result = _begin(config, "uptake")
    bundle = _load_bundle(out, config, result)
    if bundle is None:
        return _finish(out, result)
    provider = _provider(config)
    thresholds = uptake_mod.UptakeThresholds(
        match=config.thresholds.match,
        revision=config.thresholds.revision,
        adoption=config.thresholds.adoption,
        temperature=config.thresholds.temperature,
    )

    records = []
    efforts = []
    rows_json = []
    for pre, post in bundle.pairs():
        final_set = (bundle.suggestions_for(pre.writing_id, "final")
                     or bundle.suggestions_for(post.writing_id, "final"))
        if final_set is None or not final_set.suggestions:
            result.warnings.append(f"{pre.writing_id}: no finalized suggestions; skipped")
            continue
        initial_set = (bundle.suggestions_for(pre.writing_id, "initial")
                       or bundle.suggestions_for(post.writing_id, "initial"))
        d_pre = corpus.segment_sentences(pre.text, pre.writing_id)
        d_post = corpus.segment_sentences(post.text, post.writing_id)
        candidates = uptake_mod.revision_candidates(d_pre, d_post, thresholds.revision)
        try:
            origins = {
                s.suggestion_id: uptake_mod.classify_origin(
                    s, initial_set, thresholds.match, provider
                )
                for s in final_set.suggestions
            }
            dimensions = {
                s.suggestion_id: uptake_mod.classify_dimension(s)
                for s in final_set.suggestions
            }
            record = uptake_mod.compute_uptake(
                final_set, origins, dimensions, candidates, thresholds, provider
            )
        except EmbeddingError as exc:
            result.warnings.append(f"{pre.writing_id}: embedding failure ({exc}); skipped")
            continue
        records.append((pre, post, record))

        retained_ids: set[str] = set()
        if initial_set and initial_set.suggestions:
            from .embeddings import cosine as _cos

            initial_vecs = provider.embed_batch([s.text for s in initial_set.suggestions])
            for s in final_set.suggestions:
                if origins[s.suggestion_id] != uptake_mod.ORIGIN_LLM:
                    continue
                vec = provider.embed_batch([s.text])[0]
                best = max(
                    range(len(initial_vecs)), key=lambda i: _cos(vec, initial_vecs[i])
                )
                retained_ids.add(initial_set.suggestions[best].suggestion_id)
        dropped = [
            s for s in (initial_set.suggestions if initial_set else ())
            if s.suggestion_id not in retained_ids
        ]
        t_suggestions = [
            s for s in final_set.suggestions
            if origins[s.suggestion_id] == uptake_mod.ORIGIN_TEACHER
        ]
        effort = uptake_mod.teacher_effort(
            initial_set,
            sum(1 for o in origins.values() if o == uptake_mod.ORIGIN_LLM),
            t_suggestions,
            writing_id=pre.writing_id,
            dropped_initial=dropped,
        )
        efforts.append(effort)

        rows_json.append({
            "writing_id": pre.writing_id,
            "student_id": pre.student_id,
            "task_id": pre.task_id,
            "fua": record.fua,
            "fur": record.fur,
            "fua_l": record.fua_l,
            "fua_t": record.fua_t,
            "fur_l": record.fur_l,
            "fur_t": record.fur_t,
            "per_suggestion": [
                {
                    "suggestion_id": o.suggestion_id,
                    "origin": o.origin,
                    "dimensions": list(o.dimensions),
                    "match_score": o.match_score,
                    "adopted": o.adopted,
                }
                for o in record.per_suggestion
            ],
            "effort": {
                "scenario": effort.scenario,
                "total": effort.total,
                "per_dimension": effort.per_dimension,
                "unclassified": effort.unclassified,
            },
        })

    write_jsonl(out / "uptake.jsonl", rows_json)
    result.outputs["uptake"] = str(out / "uptake.jsonl")

    share_rows = []
    dims_plus_overall = list(METRIC_NAMES) + ["overall"]
    for dim in dims_plus_overall:
        shares = {"L": 0, "T": 0}
        adopted = {"L": 0, "T": 0}
        fur_l_samples, fur_t_samples = [], []
        for _, _, record in records:
            w_counts = {"L": 0, "T": 0}
            w_adopted = {"L": 0, "T": 0}
            for o in record.per_suggestion:
                if dim != "overall" and dim not in o.dimensions:
                    continue
                shares[o.origin] += 1
                w_counts[o.origin] += 1
                if o.adopted:
                    adopted[o.origin] += 1
                    w_adopted[o.origin] += 1
            if w_counts["L"]:
                fur_l_samples.append(w_adopted["L"] / w_counts["L"])
            if w_counts["T"]:
                fur_t_samples.append(w_adopted["T"] / w_counts["T"])
        total = shares["L"] + shares["T"]
        if total == 0:
            continue
        fur_l = adopted["L"] / shares["L"] * 100.0 if shares["L"] else float("nan")
        fur_t = adopted["T"] / shares["T"] * 100.0 if shares["T"] else float("nan")
        if fur_l_samples and fur_t_samples:
            stars = mann_whitney_u(fur_l_samples, fur_t_samples).stars
        else:
            stars = "ns"
        share_rows.append((
            dim,
            shares["L"] / total * 100.0,
            shares["T"] / total * 100.0,
            fur_l,
            fur_t,
            stars,
        ))
    write_table(
        out / "uptake_share.csv",
        ("dimension", "share_l_pct", "share_t_pct", "fur_l_pct", "fur_t_pct", "fur_stars"),
        share_rows,
    )
    result.outputs["uptake_share"] = str(out / "uptake_share.csv")

    effort_rows = []
    creation = [e for e in efforts if e.scenario == "creation"]
    modification = [e for e in efforts if e.scenario == "modification"]
    for dim in dims_plus_overall:
        def _values(group):
            if dim == "overall":
                return [e.total for e in group]
            return [e.per_dimension[dim] for e in group]

        c_vals, m_vals = _values(creation), _values(modification)
        mean_c = sum(c_vals) / len(c_vals) if c_vals else float("nan")
        mean_m = sum(m_vals) / len(m_vals) if m_vals else float("nan")
        if c_vals and m_vals:
            stars = mann_whitney_u(c_vals, m_vals).stars
        else:
            stars = "ns"
        direction = "down" if (c_vals and m_vals and mean_m < mean_c) else (
            "up" if (c_vals and m_vals) else "-"
        )
        effort_rows.append((dim, mean_c, mean_m, stars, direction))
    write_table(
        out / "teacher_effort.csv",
        ("dimension", "creation_mean", "modification_mean", "stars", "direction"),
        effort_rows,
    )
    result.outputs["teacher_effort"] = str(out / "teacher_effort.csv")

    result.summary = {
        "writings": len(records),
        "adopted_total": sum(r.fua for _, _, r in records),
        "suggestions_total": sum(len(r.per_suggestion) for _, _, r in records),
    }
    return _finish(out, result)


# ---------------------------------------------------------------- stats


def _load_jsonl(path: Path) -> list[dict]:
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def cmd_stats(config: RunConfig) -> CommandResult:
    out, result = _begin(config, "stats")
    bundle = _load_bundle(out, config, result)
    if bundle is None:
        return _finish(out, result)
    metrics_path = out / "metrics.jsonl"
    uptake_path = out / "uptake.jsonl"
    for path, cmd in ((metrics_path, "metrics"), (uptake_path, "uptake")):
        if not path.exists():
            result.errors.append(f"missing {path.name}; run the {cmd} command first")
    if result.errors:
        return _finish(out, result)

    metric_rows = {r["writing_id"]: r for r in _load_jsonl(metrics_path)}
    uptake_rows = {(r["student_id"], r["task_id"]): r for r in _load_jsonl(uptake_path)}

    panels: dict[str, list[PanelRow]] = {"teacher": [], "llm": []}
    quartile_items: list[tuple[tuple[str, str], dict]] = []
    for pre, post in bundle.pairs():
        m_pre, m_post = metric_rows.get(pre.writing_id), metric_rows.get(post.writing_id)
        up = uptake_rows.get((pre.student_id, pre.task_id))
        if not (m_pre and m_post and up):
            continue
        deltas = tuple(
            m_post["metrics"][name] - m_pre["metrics"][name] for name in METRIC_NAMES
        )
        entry = {
            "pre": m_pre,
            "deltas": deltas,
            "grade_delta": None,
        }
        for grader in ("teacher", "llm"):
            g_pre = bundle.grade_for(pre.writing_id, grader, "pre")
            g_post = bundle.grade_for(post.writing_id, grader, "post")
            if not (g_pre and g_post):
                continue
            panels[grader].append(PanelRow(
                student_id=pre.student_id,
                teacher_id=pre.teacher_id,
                task_id=pre.task_id,
                dependent=g_post.value,
                fua_l=up["fua_l"],
                fua_t=up["fua_t"],
                sfl_delta=deltas,
                baseline_score=g_pre.value,
            ))
            if grader == "teacher":
                entry["grade_delta"] = g_post.value - g_pre.value
        quartile_items.append(((pre.student_id, pre.task_id), entry))

    model_specs = {
        "model1": ["fua_l", "fua_t", "baseline_score"],
        "model2": ["fua_l", "fua_t"] + list(METRIC_NAMES) + ["baseline_score"],
    }
    regression_rows = []
    for model, spec in model_specs.items():
        for grader, rows in panels.items():
            if len(rows) < len(spec) + 2:
                result.warnings.append(
                    f"{model}/{grader}: {len(rows)} rows is too few to estimate; skipped"
                )
                continue
            regressors = list(spec)
            while True:
                try:
                    fit = fe_regression(rows, regressors)
                    break
                except RankDeficiencyError as exc:
                    result.warnings.append(
                        f"{model}/{grader}: dropped collinear regressor {exc.column}"
                    )
                    regressors.remove(exc.column)
                    if not regressors:
                        fit = None
                        break
            if fit is None:
                continue
            for name in regressors:
                stars = star_label(fit.p_values[name])
                regression_rows.append((
                    model, grader, name,
                    fit.coefficients[name], fit.std_errors[name], stars,
                    coefficient_cell(fit.coefficients[name], fit.std_errors[name], stars),
                    fit.r_squared, fit.n_obs,
                ))
    write_table(
        out / "regression.csv",
        ("model", "dependent", "regressor", "coefficient", "std_error",
         "stars", "cell", "r_squared", "n_obs"),
        regression_rows,
    )
    result.outputs["regression"] = str(out / "regression.csv")

    quartile_rows = []
    for idx, name in enumerate(METRIC_NAMES):
        usable = [
            (key, entry) for key, entry in quartile_items
            if entry["grade_delta"] is not None
        ]
        if len(usable) < 4:
            result.warnings.append(f"quartiles/{name}: fewer than 4 usable pairs; skipped")
            continue
        split = quartile_split(
            [(key, entry["pre"]["metrics"][name]) for key, entry in usable]
        )
        by_key = dict(usable)
        cells = []
        for q in ("Q1", "Q2", "Q3", "Q4"):
            keys = split.groups[q]
            xs = [by_key[k]["deltas"][idx] for k in keys]
            ys = [by_key[k]["grade_delta"] for k in keys]
            if len(xs) < 3:
                cells.extend(("", "ns"))
                continue
            test = spearman(xs, ys)
            if test.degenerate:
                cells.extend(("", "ns"))
            else:
                cells.extend((test.statistic, test.stars))
        quartile_rows.append((name, *cells))
    write_table(
        out / "quartile_correlations.csv",
        ("dimension",
         "q1_rho", "q1_stars", "q2_rho", "q2_stars",
         "q3_rho", "q3_stars", "q4_rho", "q4_stars"),
        quartile_rows,
    )
    result.outputs["quartile_correlations"] = str(out / "quartile_correlations.csv")

    result.summary = {
        "panel_rows": {grader: len(rows) for grader, rows in panels.items()},
        "regressions": len(regression_rows),
    }
    return _finish(out, result)


# ---------------------------------------------------------------- report


_REPORT_SECTIONS = (
    ("Corpus", "ingest_stats.md"),
    ("Linguistic growth", "metric_deltas.md"),
    ("Emotional and moral shifts", "affect_shifts.md"),
    ("Suggestion share and adoption", "uptake_share.md"),
    ("Teacher effort", "teacher_effort.md"),
    ("Fixed-effects regressions", "regression.md"),
    ("Quartile correlations", "quartile_correlations.md"),
)


def cmd_report(config: RunConfig) -> CommandResult:
    out, result = _begin(config, "report")
    sections = []
    for title, filename in _REPORT_SECTIONS:
        path = out / filename
        if path.exists():
            sections.append(f"## {title}\n\n{path.read_text(encoding='utf-8')}")
        else:
            result.warnings.append(f"missing table {filename}; section skipped")
    if not sections:
        result.errors.append("no tables found; run the other commands first")
        return _finish(out, result)
    report_path = out / "report" / "REPORT.md"
    atomic_write(report_path, "# Revision analytics report\n\n" + "\n\n".join(sections) + "\n")
    result.outputs["report"] = str(report_path)
    result.summary = {"sections": len(sections)}
    return _finish(out, result)
