import argparse
from typing import Optional
from app.core.config import settings
from app.core.exceptions import ConfigError
from app.schemas.schemas import RunConfig
from app.services.pipeline import PipelineService


def split_list(raw: Optional[str], cast=float, name: str = "value") -> Optional[list]:
    """Parse a comma-separated flag; None passes through"""
    if raw is None:
        return None
    items = [item.strip() for item in raw.split(",") if item.strip()]
    try:
        return [cast(item) for item in items]
    except ValueError:
        raise ConfigError(f"cannot parse {name} list {raw!r}")


def add_construction_arguments(parser: argparse.ArgumentParser):
    """Flags shared by every subcommand"""
    parser.add_argument("--alpha", type=float, default=0.0, help="Fractional order, 0 <= alpha < 2 (default: 0).")
    parser.add_argument("--b", type=float, default=None,
                        help="Relative gap width; defaults to the smallest admissible b >= 1/3.")
    parser.add_argument("--depth-omega", type=int, default=settings.DEFAULT_DEPTH_OMEGA, dest="depth_omega",
                        help=f"Resolution of the Cantor weight (default: {settings.DEFAULT_DEPTH_OMEGA}).")
    parser.add_argument("--depth-sigma", type=int, default=settings.DEFAULT_DEPTH_SIGMA, dest="depth_sigma",
                        help=f"Last generation of sigma atoms (default: {settings.DEFAULT_DEPTH_SIGMA}).")
    parser.add_argument("--k-max", type=int, default=None, dest="k_max", help="Generations checked by the c search.")
    parser.add_argument("--n-targets", type=str, default=None, dest="n_targets",
                        help="Comma list of off-testing targets (default: 1,2,4,8).")
    parser.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="Seed of the candidate families.")
    parser.add_argument("--out", type=str, default=None, help="Output path.")
    parser.add_argument("--threads", type=int, default=None, help="Cap on numba threads.")


def add_report_arguments(parser: argparse.ArgumentParser):
    """Flags of the commands that produce reports"""
    parser.add_argument("--format", choices=["json", "csv"], default="json", help="Report format (default: json).")
    parser.add_argument("--claims", type=str, default=None, help="Comma list of claim ids (default: all).")
    parser.add_argument("--timings", action="store_true", help="Record wall-clock seconds per claim.")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Validated RunConfig from parsed flags"""
    claims = split_list(getattr(args, "claims", None), str, "claim")
    return PipelineService.make_config(
        alpha=args.alpha,
        b=args.b,
        depth_omega=args.depth_omega,
        depth_sigma=args.depth_sigma,
        k_max=args.k_max,
        n_targets=split_list(args.n_targets, float, "target"),
        seed=args.seed,
        out=args.out,
        format=getattr(args, "format", "json"),
        claims=claims,
        threads=args.threads,
        timings=getattr(args, "timings", False),
    )
