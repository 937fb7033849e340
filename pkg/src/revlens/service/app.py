"""FastAPI service wrapping the analysis package.

Unit endpoints expose the per-writing computations for multi-client use;
/pipeline endpoints run the batch commands against server-local paths and
return their manifests. A deterministic /embed endpoint and a mock /llm
endpoint implement the package's own wire contracts so clients (including
the thin CLI and the test suite) can be exercised end to end.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from .. import affect, commands, corpus, lexical, syntax, uptake as uptake_mod
from ..annotation import MockLlmClient, cohen_kappa, fleiss_kappa
from ..annotation.tsv import (
    SentenceKey,
    a1_schema,
    a2_schema,
    b_schema,
    filter_schema,
    validate_tsv,
)
from ..coherence import semantic_dispersion, semantic_shift
from ..embeddings import (
    EmbeddingError,
    EmbeddingProviderConfig,
    EmbeddingVector,
    DeterministicProvider,
    content_key,
)
from ..panel import PanelRow, RankDeficiencyError, fe_regression
from ..stats import mann_whitney_u, quartile_split, spearman, wilcoxon_signed_rank
from . import schemas as s

_SCHEMAS = {
    "filter": filter_schema,
    "a1": a1_schema,
    "b": b_schema,
    "a2": a2_schema,
}


def _provider(dim: int | None, seed: int | None, app_state) -> DeterministicProvider:
    config = EmbeddingProviderConfig(
        backend="deterministic",
        dim=dim if dim is not None else app_state.embed_dim,
        seed=seed if seed is not None else app_state.embed_seed,
    )
    return DeterministicProvider(config)


def create_app(embed_dim: int = 64, embed_seed: int = 0, mock_llm_seed: int = 0) -> FastAPI:
    app = FastAPI(title="revision analytics service", version=__version__)
    app.state.embed_dim = embed_dim
    app.state.embed_seed = embed_seed
    app.state.mock_llm_seed = mock_llm_seed

    @app.get("/health", response_model=s.HealthResponse)
    def health():
        return s.HealthResponse(status="ok", version=__version__)

    # ------------------------------------------------------------- corpus

    @app.post("/corpus/segment", response_model=s.SegmentResponse)
    def segment(req: s.SegmentRequest):
        sentences = corpus.segment_sentences(req.text, req.writing_id)
        return s.SegmentResponse(
            sentences=[
                s.SentenceModel(
                    writing_id=x.writing_id, sentence_id=x.sentence_id, text=x.text
                )
                for x in sentences
            ],
            keep=[corpus.coarse_filter(x) for x in sentences],
        )

    @app.post("/corpus/normalize-grade", response_model=s.NormalizeGradeResponse)
    def normalize(req: s.NormalizeGradeRequest):
        try:
            return s.NormalizeGradeResponse(
                value=corpus.normalize_grade(req.raw, req.raw_min, req.raw_max)
            )
        except corpus.CorpusError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    # ---------------------------------------------------------- embeddings

    @app.post("/embed", response_model=s.EmbedResponse)
    def embed(req: s.EmbedRequest):
        provider = _provider(req.dim, req.seed, app.state)
        vectors = provider.embed_batch(req.texts)
        return s.EmbedResponse(vectors=[list(v.values) for v in vectors])

    # ------------------------------------------------------------- metrics

    @app.post("/metrics/lexical", response_model=s.MetricResponse)
    def metric_lexical(req: s.LexicalRequest):
        return s.MetricResponse(value=lexical.mattr(req.tokens, req.window))

    @app.post("/metrics/syntax", response_model=s.MetricResponse)
    def metric_syntax(req: s.SyntaxRequest):
        try:
            graphs = syntax.parse_conllu(req.conllu)
        except syntax.ConlluParseError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        value = syntax.syntactic_diversity(graphs, req.iterations)
        return s.MetricResponse(value=value.value, degenerate=value.degenerate)

    @app.post("/metrics/coherence", response_model=s.CoherenceResponse)
    def metric_coherence(req: s.CoherenceRequest):
        if req.vectors is not None:
            vectors = [
                EmbeddingVector(key=str(i), values=tuple(v))
                for i, v in enumerate(req.vectors)
            ]
        elif req.texts is not None:
            provider = _provider(req.dim, req.seed, app.state)
            vectors = provider.embed_batch(req.texts)
        else:
            raise HTTPException(status_code=422, detail="provide vectors or texts")
        try:
            dispersion = semantic_dispersion(vectors, req.polarity)
            shift = semantic_shift(vectors, req.polarity)
        except EmbeddingError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return s.CoherenceResponse(
            dispersion=dispersion.value,
            shift=shift.value,
            polarity=req.polarity,
            degenerate=dispersion.degenerate or shift.degenerate,
        )

    @app.post("/metrics/entropy", response_model=s.EntropyResponse)
    def metric_entropy(req: s.EntropyRequest):
        try:
            dist = affect.aggregate_labels(
                req.labels, req.total_sentences, req.task, req.writing_id
            )
            entropy = affect.spectrum_entropy(dist, req.base)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return s.EntropyResponse(
            counts=list(dist.counts),
            proportions=list(dist.proportions),
            entropy=entropy,
        )

    # -------------------------------------------------------------- uptake

    @app.post("/uptake/dimension", response_model=s.DimensionResponse)
    def dimension(req: s.DimensionRequest):
        suggestion = corpus.Suggestion("s", req.text, req.direction_tag)
        return s.DimensionResponse(dimensions=list(uptake_mod.classify_dimension(suggestion)))

    @app.post("/uptake/similarity", response_model=s.SimilarityResponse)
    def similarity(req: s.SimilarityRequest):
        return s.SimilarityResponse(value=uptake_mod.sequence_similarity(req.a, req.b))

    @app.post("/uptake/writing", response_model=s.UptakeResponse)
    def uptake_writing(req: s.UptakeRequest):
        provider = _provider(req.dim, req.seed, app.state)
        thresholds = uptake_mod.UptakeThresholds(
            match=req.match_threshold,
            revision=req.revision_threshold,
            adoption=req.adoption_threshold,
            temperature=req.temperature,
        )
        initial = corpus.SuggestionSet(
            req.writing_id, "initial",
            tuple(corpus.Suggestion(m.suggestion_id, m.text, m.direction_tag) for m in req.initial),
        ) if req.initial else None
        final = corpus.SuggestionSet(
            req.writing_id, "final",
            tuple(corpus.Suggestion(m.suggestion_id, m.text, m.direction_tag) for m in req.final),
        )
        d_pre = corpus.segment_sentences(req.pre_text, req.writing_id)
        d_post = corpus.segment_sentences(req.post_text, req.writing_id)
        candidates = uptake_mod.revision_candidates(d_pre, d_post, thresholds.revision)
        origins = {
            x.suggestion_id: uptake_mod.classify_origin(x, initial, thresholds.match, provider)
            for x in final.suggestions
        }
        dims = {x.suggestion_id: uptake_mod.classify_dimension(x) for x in final.suggestions}
        record = uptake_mod.compute_uptake(final, origins, dims, candidates, thresholds, provider)
        return s.UptakeResponse(
            writing_id=record.writing_id,
            per_suggestion=[
                s.SuggestionOutcomeModel(
                    suggestion_id=o.suggestion_id,
                    origin=o.origin,
                    dimensions=list(o.dimensions),
                    match_score=o.match_score,
                    adopted=o.adopted,
                )
                for o in record.per_suggestion
            ],
            fua=record.fua,
            fur=record.fur,
            fua_l=record.fua_l,
            fua_t=record.fua_t,
            fur_l=record.fur_l,
            fur_t=record.fur_t,
            n_candidates=len(candidates.candidates),
        )

    # ---------------------------------------------------------- annotation

    @app.post("/annotate/validate", response_model=s.ValidateTsvResponse)
    def validate(req: s.ValidateTsvRequest):
        keys = [SentenceKey.from_wire(w) for w in req.keys]
        violations = validate_tsv(req.raw, keys, _SCHEMAS[req.stage](req.task))
        return s.ValidateTsvResponse(
            ok=not violations,
            violations=[
                s.ViolationModel(condition=v.condition, row=v.row, message=v.message)
                for v in violations
            ],
        )

    @app.post("/llm", response_model=s.LlmResponse)
    def llm(req: s.LlmRequest):
        task = "moral" if "moral" in req.prompt.lower() else "emotion"
        mock = MockLlmClient(task=task, seed=app.state.mock_llm_seed)
        return s.LlmResponse(tsv=mock.complete(req.role, req.prompt, req.payload_tsv))

    @app.post("/agreement/cohen", response_model=s.KappaResponse)
    def cohen(req: s.CohenRequest):
        try:
            kappa = cohen_kappa(req.labels_a, req.labels_b)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return s.KappaResponse(kappa=kappa)

    @app.post("/agreement/fleiss", response_model=s.KappaResponse)
    def fleiss(req: s.FleissRequest):
        try:
            kappa = fleiss_kappa(req.label_matrix)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return s.KappaResponse(kappa=kappa, degenerate=kappa is None)

    # --------------------------------------------------------------- stats

    def _test_result(result):
        return s.TestResultModel(
            statistic=result.statistic,
            p_value=result.p_value,
            method=result.method,
            n=list(result.n),
            stars=result.stars,
            degenerate=result.degenerate,
        )

    @app.post("/stats/wilcoxon", response_model=s.TestResultModel)
    def stats_wilcoxon(req: s.PairedTestRequest):
        return _test_result(wilcoxon_signed_rank(req.pairs))

    @app.post("/stats/mann-whitney", response_model=s.TestResultModel)
    def stats_mwu(req: s.TwoSampleRequest):
        return _test_result(mann_whitney_u(req.x, req.y))

    @app.post("/stats/spearman", response_model=s.TestResultModel)
    def stats_spearman(req: s.TwoSampleRequest):
        try:
            return _test_result(spearman(req.x, req.y))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/stats/quartiles", response_model=s.QuartileResponse)
    def stats_quartiles(req: s.QuartileRequest):
        split = quartile_split(req.items)
        return s.QuartileResponse(
            groups=split.groups, cutpoints=split.cutpoints, degenerate=split.degenerate
        )

    @app.post("/stats/regression", response_model=s.RegressionResponse)
    def stats_regression(req: s.RegressionRequest):
        rows = [
            PanelRow(
                student_id=r.student_id,
                teacher_id=r.teacher_id,
                task_id=r.task_id,
                dependent=r.dependent,
                fua_l=r.fua_l,
                fua_t=r.fua_t,
                sfl_delta=tuple(r.sfl_delta),
                baseline_score=r.baseline_score,
            )
            for r in req.rows
        ]
        try:
            fit = fe_regression(rows, req.regressors)
        except (RankDeficiencyError, KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return s.RegressionResponse(
            coefficients=fit.coefficients,
            std_errors=fit.std_errors,
            p_values=fit.p_values,
            r_squared=fit.r_squared,
            n_obs=fit.n_obs,
            df_resid=fit.df_resid,
            fe_dims=list(fit.fe_dims),
        )

    # ------------------------------------------------------------ pipeline

    _COMMANDS = {
        "ingest": lambda cfg, task: commands.cmd_ingest(cfg),
        "metrics": lambda cfg, task: commands.cmd_metrics(cfg),
        "annotate": lambda cfg, task: commands.cmd_annotate(cfg, task or "emotion"),
        "uptake": lambda cfg, task: commands.cmd_uptake(cfg),
        "stats": lambda cfg, task: commands.cmd_stats(cfg),
        "report": lambda cfg, task: commands.cmd_report(cfg),
    }

    def _run_pipeline(name: str, req: s.PipelineRequest) -> s.PipelineResponse:
        result = _COMMANDS[name](req.config, req.task)
        return s.PipelineResponse(
            command=result.command,
            ok=result.ok,
            outputs=result.outputs,
            errors=result.errors,
            warnings=result.warnings,
            summary=result.summary,
            effective_config=req.config,
        )

    @app.post("/pipeline/ingest", response_model=s.PipelineResponse)
    def pipeline_ingest(req: s.PipelineRequest):
        return _run_pipeline("ingest", req)

    @app.post("/pipeline/metrics", response_model=s.PipelineResponse)
    def pipeline_metrics(req: s.PipelineRequest):
        return _run_pipeline("metrics", req)

    @app.post("/pipeline/annotate", response_model=s.PipelineResponse)
    def pipeline_annotate(req: s.PipelineRequest):
        return _run_pipeline("annotate", req)

    @app.post("/pipeline/uptake", response_model=s.PipelineResponse)
    def pipeline_uptake(req: s.PipelineRequest):
        return _run_pipeline("uptake", req)

    @app.post("/pipeline/stats", response_model=s.PipelineResponse)
    def pipeline_stats(req: s.PipelineRequest):
        return _run_pipeline("stats", req)

    @app.post("/pipeline/report", response_model=s.PipelineResponse)
    def pipeline_report(req: s.PipelineRequest):
        return _run_pipeline("report", req)

    return app
