"""Writing-revision analytics toolkit.

Core subsystems: corpus ingestion and text primitives, embedding
providers, the six essay-level linguistic metrics, the batch annotation
orchestrator, feedback-uptake tracing, and the statistical layer. A
FastAPI service wraps the package; the CLI is a thin client of that
service.
"""

__version__ = "0.1.0"
