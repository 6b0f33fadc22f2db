import argparse
from app.cli.common import add_construction_arguments, add_report_arguments, config_from_args
from app.core.exceptions import EXIT_CLAIM_FAILED, EXIT_OK
from app.core.logging import logger
from app.services.pipeline import PipelineService


def register(subparsers):
    """Add the verify subcommand"""
    parser = subparsers.add_parser("verify", help="Run the selected claims and write a report.")
    add_construction_arguments(parser)
    add_report_arguments(parser)
    parser.set_defaults(handler=cmd_verify)
    return parser


def cmd_verify(args: argparse.Namespace) -> int:
    """Exit 0 iff every selected claim passes"""
    config = config_from_args(args)
    report = PipelineService.run(config)
    PipelineService.write_report(report, config.out, config.format)
    failed = [c.claim_id for c in report.claims if not c.passed]
    if failed:
        logger.warning(f"Failed claims: {', '.join(failed)}")
        return EXIT_CLAIM_FAILED
    logger.info(f"All {len(report.claims)} claims passed")
    return EXIT_OK
