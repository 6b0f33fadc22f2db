import argparse
from app.cli.common import add_construction_arguments, add_report_arguments, config_from_args, split_list
from app.core.exceptions import EXIT_CLAIM_FAILED, EXIT_OK
from app.core.logging import logger
from app.services.pipeline import SWEEP_PARAMETERS, PipelineService

DEFAULT_ALPHAS = "0,0.5,1.0,1.5"


def register(subparsers):
    """Add the sweep subcommand"""
    parser = subparsers.add_parser("sweep", help="Repeat verify over a list of parameter values.")
    add_construction_arguments(parser)
    add_report_arguments(parser)
    parser.add_argument("--parameter", choices=SWEEP_PARAMETERS, default="alpha", help="Swept parameter.")
    parser.add_argument("--values", type=str, default=None,
                        help=f"Comma list of values (default for alpha: {DEFAULT_ALPHAS}).")
    parser.set_defaults(handler=cmd_sweep)
    return parser


def cmd_sweep(args: argparse.Namespace) -> int:
    """One report per value plus the summary table"""
    raw = args.values
    if raw is None and args.parameter == "alpha":
        raw = DEFAULT_ALPHAS
    values = split_list(raw, float, args.parameter) or []
    config = config_from_args(args)
    sweep = PipelineService.sweep(config, args.parameter, values)
    PipelineService.write_report(sweep, config.out, config.format)
    for entry in sweep.entries:
        status = "pass" if entry.passed else (entry.error or "fail")
        logger.info(f"{entry.parameter}={entry.value:g} b={entry.b} s0={entry.s0}: {status}")
    return EXIT_OK if sweep.passed else EXIT_CLAIM_FAILED
