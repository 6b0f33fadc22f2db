import argparse
from app.cli.common import add_construction_arguments, config_from_args
from app.core.exceptions import EXIT_OK
from app.core.logging import logger
from app.core.parallel import configure_threads
from app.services.construction import ConstructionService
from app.services.pipeline import PipelineService


def register(subparsers):
    """Add the construct subcommand"""
    parser = subparsers.add_parser("construct", help="Build the measures and write a JSON snapshot.")
    add_construction_arguments(parser)
    parser.add_argument("--placement", choices=["center", "riesz"], default="center",
                        help="Atom placement: gap centers or the Riesz points a + c b |I|.")
    parser.add_argument("--no-rows", action="store_true", dest="no_rows",
                        help="Skip the γ_n searches and write no row layout.")
    parser.set_defaults(handler=cmd_construct)
    return parser


def cmd_construct(args: argparse.Namespace) -> int:
    """Write σ atoms, tree summary and row layout"""
    config = config_from_args(args)
    configure_threads(config.threads)
    ctx = PipelineService.build_context(config)
    kind = "frac" if args.placement == "center" else "riesz"
    sigma = ctx.sigma_for(kind, config.depth_sigma)
    rows = None if args.no_rows else ctx.planar(kind, config.depth_sigma)[1]
    snapshot = ConstructionService.snapshot(ctx.params, ctx.tree, sigma, rows)
    out = config.out or "snapshot.json"
    ConstructionService.save_snapshot(snapshot, out)
    logger.info(f"Constructed {len(snapshot.atoms)} σ atoms ({args.placement}) at depth {config.depth_sigma}")
    return EXIT_OK
