import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from degenflow import __version__
from degenflow.config import settings
from degenflow.errors import DegenflowError
from degenflow.models import ErrorResponse, ExperimentKind
from degenflow.services.pipelines import EXIT_ERROR, run_experiment
from degenflow.utils.reports import write_error
from degenflow.utils.validators import load_config

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degenflow",
        description="Solve and certify degenerate quasilinear parabolic problems",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level (default from settings)")
    sub = parser.add_subparsers(dest="command", required=True)

    for kind in ExperimentKind:
        run = sub.add_parser(kind.value, help=f"Run a {kind.value} experiment")
        run.add_argument("--config", type=Path, required=True, help="Path to the JSON experiment config")
        run.add_argument("--out", type=Path, default=None, help="Output directory (overrides output_dir)")
        run.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="Dotted config override, value parsed as JSON (repeatable)",
        )

    serve = sub.add_parser("serve", help="Run the experiment job service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _run(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config, overrides=args.override, kind=args.command)
    except DegenflowError as e:
        logger.error(f"Invalid config [{e.error_code}]: {e.detail}")
        if args.out is not None:
            write_error(ErrorResponse(**e.to_dict()), args.out)
        return EXIT_ERROR
    result = run_experiment(config, out_dir=args.out)
    print(f"{config.kind.value}: exit {result.exit_status}, artifacts in {result.out_dir}")
    return result.exit_status


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    if args.command == "serve":
        import uvicorn
        uvicorn.run("degenflow.main:app", host=args.host, port=args.port)
        return 0
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
