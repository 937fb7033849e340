from .agreement import cohen_kappa, fleiss_kappa
from .clients import HttpLlmClient, LlmClientConfig, LlmError, LlmTransportError, MockLlmClient
from .pipeline import (
    AbaRecord,
    BatchProcessingError,
    RunLedger,
    StageA,
    StageB,
    StreamingWriter,
    calibration_round,
    calibration_should_stop,
    completeness_loop,
    relevance_filter,
    resume_ledger,
    run_aba_batch,
)
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

__all__ = [
    "AbaRecord",
    "BatchProcessingError",
    "HttpLlmClient",
    "LlmClientConfig",
    "LlmError",
    "LlmTransportError",
    "MockLlmClient",
    "RunLedger",
    "SentenceKey",
    "StageA",
    "StageB",
    "StreamingWriter",
    "TsvSchema",
    "Violation",
    "a1_schema",
    "a2_schema",
    "b_schema",
    "calibration_round",
    "calibration_should_stop",
    "cohen_kappa",
    "completeness_loop",
    "filter_schema",
    "fleiss_kappa",
    "relevance_filter",
    "resume_ledger",
    "run_aba_batch",
    "validate_tsv",
]
