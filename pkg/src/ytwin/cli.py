"""Command line entry point: ``ytwin server|run|export|feeds``."""

from __future__ import annotations

import argparse
import functools
import logging
from pathlib import Path
from typing import Optional, Sequence

from .config import get_db_path, get_log_level, load_recipe
from .db import ORCHESTRATOR, WORKER, PlatformStore
from .errors import YTwinError
from .export import export_analysis
from .news import ingest_catalog, ingest_feed, load_catalog
from .server import serve
from .simulation import run_simulation

logger = logging.getLogger(__name__)


def _server(args: argparse.Namespace) -> None:
    serve(args.db, host=args.host, port=args.port)


def _run(args: argparse.Namespace) -> None:
    recipe = load_recipe(args.recipe)
    manifest = run_simulation(
        recipe,
        client_id=args.client_id,
        role=args.role,
        resume=args.resume,
        mock_llm=args.mock_llm,
    )
    path = args.manifest or f"{recipe.simulation.name}.{args.client_id}.manifest.json"
    manifest.write(path)
    print(f"Finished at round {manifest.end_round} with {manifest.agents} agents")
    print(f"Manifest: {path}")


def _export(args: argparse.Namespace) -> None:
    with PlatformStore(args.db) as store:
        files = export_analysis(store, args.out)
    for path in files:
        print(path)


def _feeds_ingest(args: argparse.Namespace) -> None:
    with PlatformStore(args.db) as store:
        results = ingest_catalog(
            load_catalog(args.catalog),
            functools.partial(ingest_feed, store),
            args.from_dir,
        )
    for result in results:
        print(
            f"{result.website.name}: {len(result.new_ids)} new, "
            f"{result.duplicates} duplicates, {result.skipped} skipped"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ytwin", description="Digital twin of a microblogging platform."
    )
    parser.add_argument(
        "--log-level",
        default=get_log_level(),
        help="logging level (default: $YTWIN_LOG_LEVEL or INFO)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    server = commands.add_parser("server", help="run the platform server")
    server.add_argument("--db", default=get_db_path(), help="SQLite store path")
    server.add_argument("--host", default="127.0.0.1")
    server.add_argument("--port", type=int, default=5000)
    server.set_defaults(func=_server)

    run = commands.add_parser("run", help="run a simulation client")
    run.add_argument("--recipe", required=True, help="recipe JSON file")
    run.add_argument("--resume", action="store_true", help="reuse owned agents")
    run.add_argument(
        "--mock-llm", action="store_true", help="answer every prompt with the mock"
    )
    run.add_argument("--client-id", default="client-0")
    run.add_argument("--role", choices=(ORCHESTRATOR, WORKER), default=ORCHESTRATOR)
    run.add_argument("--manifest", help="where to write the run manifest")
    run.set_defaults(func=_run)

    export = commands.add_parser("export", help="export analysis datasets")
    export.add_argument("--db", default=get_db_path(), help="SQLite store path")
    export.add_argument("--out", required=True, help="output directory")
    export.set_defaults(func=_export)

    feeds = commands.add_parser("feeds", help="news feed utilities")
    feeds_commands = feeds.add_subparsers(dest="feeds_command", required=True)
    ingest = feeds_commands.add_parser("ingest", help="ingest a feed catalog")
    ingest.add_argument("--catalog", help="JSONL catalog (default: bundled)")
    ingest.add_argument("--from-dir", help="read <slug>.xml files instead of HTTP")
    ingest.add_argument("--db", default=get_db_path(), help="SQLite store path")
    ingest.set_defaults(func=_feeds_ingest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> None:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=str(args.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except YTwinError as e:
        raise SystemExit(f"{e.code}: {e}") from e
    except FileNotFoundError as e:
        raise SystemExit(f"File not found: {Path(e.filename or '')}") from e


if __name__ == "__main__":
    main()
