"""
Main CLI application: logging setup, router assembly and the global
exception handler that maps errors to exit codes
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from app.config import settings
from app.errors import CampError

# Import routers
from app.routers.experiment_router import router as experiment_router
from app.routers.graph_router import router as graph_router

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def configure_logging(level: Optional[str] = None):
    """Configure the root logger once; run-log handlers are attached per run"""
    root_logger = logging.getLogger()
    root_logger.setLevel(level or settings.LOG_LEVEL)
    if not any(getattr(h, "_camp_console", False) for h in root_logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._camp_console = True
        root_logger.addHandler(handler)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camp",
        description="Centrality-aware asynchronous message passing: training, sweeps and diagnostics",
    )
    parser.add_argument("--log-level", default=None, help="overrides CAMP_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Include routers
    experiment_router.mount(subparsers)
    graph_router.mount(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        response = args.handler(args)
    except CampError as e:
        logger.error(f"❌ {args.command} failed: {type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"Unhandled exception in {args.command}", exc_info=e)
        return 1

    if "-" not in response.outputs:
        print(response.model_dump_json(indent=2))
    if response.message:
        logger.info(f"{args.command}: {response.message}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
