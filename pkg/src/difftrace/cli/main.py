"""``difftrace`` command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence

from ..errors import DifftraceError, ErrorCategory
from .commands import COMMAND_REGISTRY, solve_command

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="difftrace",
        description="Train small diffusion models and attribute their outputs to training samples.",
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging verbosity (default: WARNING)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMAND_REGISTRY.items():
        summary = (command.__doc__ or "").strip().split("\n", 1)[0]
        sub = subparsers.add_parser(name, help=summary or None)
        sub.add_argument("--config", required=True, help="TOML or JSON configuration file")
        sub.add_argument("--out", required=True, help="output directory")
    return parser


def _error_line(err: BaseException) -> str:
    category = err.category if isinstance(err, DifftraceError) else ErrorCategory.IO
    message = " ".join(str(err).split())
    return f"error: {category}: {message}"


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command; return the process exit status.

    Failures print a single ``error: <category>: <message>`` line to stderr.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        command = solve_command(args.command).from_file(args.config, args.out)
        path = command.execute()
    except (DifftraceError, OSError) as err:
        logger.debug("%s failed", args.command, exc_info=True)
        print(_error_line(err), file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
