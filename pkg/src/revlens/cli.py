"""Thin command-line client for the analysis service.

Subcommands map one-to-one onto /pipeline endpoints. By default the CLI
mounts the service in-process (no network, single process); pass --server
to target a running instance instead. Flags override config-file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .config import RunConfig

PIPELINE_COMMANDS = ("ingest", "metrics", "annotate", "uptake", "stats", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="revlens",
        description="Batch analytics for teacher-mediated writing revision.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="run seed override")
        p.add_argument("--workers", type=int, default=None, help="worker count override")
        p.add_argument("--mock-llm", action="store_true", help="force the mock model backend")
        p.add_argument(
            "--polarity", choices=("distance", "similarity"), default=None,
            help="coherence polarity override",
        )
        p.add_argument("--out", type=Path, default=None, help="output directory override")
        p.add_argument("--server", default=None, help="service base URL (default: in-process)")

    for name in PIPELINE_COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        add_common(p)
        if name == "annotate":
            p.add_argument("--task", choices=("emotion", "moral"), default="emotion")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.polarity is not None:
        updates["coherence_polarity"] = args.polarity
    if args.out is not None:
        updates["paths"] = config.paths.model_copy(update={"out_dir": str(args.out)})
    if args.mock_llm:
        updates["llm"] = config.llm.model_copy(update={"mock": True})
    return config.model_copy(update=updates) if updates else config


def make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from .service import create_app

    transport = httpx.ASGITransport(app=create_app())
    return httpx.Client(transport=transport, base_url="http://service", timeout=600.0)


def run_pipeline_command(args: argparse.Namespace) -> int:
    config = load_config(args)
    body = {"config": config.model_dump()}
    if getattr(args, "task", None):
        body["task"] = args.task
    with make_client(args.server) as client:
        resp = client.post(f"/pipeline/{args.command}", json=body)
    if resp.status_code != 200:
        print(f"service error {resp.status_code}: {resp.text}", file=sys.stderr)
        return 2
    manifest = resp.json()
    for warning in manifest["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    for error in manifest["errors"]:
        print(f"error: {error}", file=sys.stderr)
    print(json.dumps(
        {k: manifest[k] for k in ("command", "ok", "outputs", "summary")},
        indent=2, sort_keys=True, ensure_ascii=False,
    ))
    return 0 if manifest["ok"] else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    return run_pipeline_command(args)


if __name__ == "__main__":
    sys.exit(main())
