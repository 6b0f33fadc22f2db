import argparse
import sys
from typing import Optional
from app.core.config import settings
from app.core.exceptions import Cantor2wError
from app.core.logging import logger
from app.cli import construct, verify, sweep


def build_parser() -> argparse.ArgumentParser:
    """Top-level parser with one subcommand per module"""
    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME,
        description="Construct Cantor/atomic weight pairs and certify their two-weight constants numerically",
    )
    parser.add_argument("--version", action="version", version=f"{settings.APP_NAME} {settings.APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Include subcommands
    construct.register(subparsers)
    verify.register(subparsers)
    sweep.register(subparsers)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    logger.info(f"{settings.APP_NAME} {settings.APP_VERSION}: {args.command}")
    try:
        return args.handler(args)
    except Cantor2wError as e:
        logger.error(f"{args.command} stopped: {e.message}")
        print(e.describe(), file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
