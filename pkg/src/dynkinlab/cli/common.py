"""Shared plumbing for the command-line modules."""

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple

from dotenv import load_dotenv

from .. import __version__
from ..core.obstacle import ObstacleProblem
from ..core.sde import SdeModel
from ..core.solver import complementarity_report, extract_regions, solve
from ..data.config import RunConfig, load_config
from ..data.models import ComplementarityReport, GridFunction, StoppingRegions
from ..errors import ConfigError, DynkinLabError

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunContext:
    """Everything a command needs after argument and config parsing."""

    config: RunConfig
    model: SdeModel
    problem: ObstacleProblem
    out_dir: Path
    threads: Optional[int]
    quiet: bool


@dataclass(frozen=True)
class SolveResult:
    value: GridFunction
    report: ComplementarityReport
    regions: StoppingRegions


def build_parser(prog: str, description: str, epilog: str = "") -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=prog,
        description=description,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=epilog,
    )
    parser.add_argument("--config", "-c", required=True, help="TOML run configuration")
    parser.add_argument("--out", "-o", help="Output directory (default: $DYNKINLAB_OUT or [output].dir)")
    parser.add_argument("--threads", type=int, help="Worker threads (default: $DYNKINLAB_THREADS)")
    parser.add_argument("--quiet", "-q", action="store_true", help="Only print warnings and the summary")
    return parser


def _env_threads() -> Optional[int]:
    raw = os.getenv("DYNKINLAB_THREADS")
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"DYNKINLAB_THREADS must be an integer, got {raw!r}", "DYNKINLAB_THREADS") from e
    if value < 1:
        raise ConfigError("DYNKINLAB_THREADS must be positive", "DYNKINLAB_THREADS")
    return value


def prepare(args: argparse.Namespace) -> RunContext:
    load_dotenv()
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config)
    model = cfg.build_model()
    problem = cfg.build_problem()
    if model.dim != problem.dim:
        raise ConfigError(f"model dimension {model.dim} does not match the grid dimension {problem.dim}", "model")
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be positive", "threads")
    threads = args.threads if args.threads is not None else _env_threads()
    out_dir = Path(args.out or os.getenv("DYNKINLAB_OUT") or cfg.output.directory)
    return RunContext(cfg, model, problem, out_dir, threads, args.quiet)


def run(body: Callable[[RunContext], int], parser: argparse.ArgumentParser, argv: Optional[Sequence[str]]) -> int:
    """Parse arguments, run ``body`` and map failures onto exit codes."""
    args = parser.parse_args(argv)
    try:
        return body(prepare(args))
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except DynkinLabError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR


def solve_config(ctx: RunContext, refine: int = 0) -> SolveResult:
    cfg = ctx.config
    opts = cfg.grid.solver
    value = solve(ctx.model, ctx.problem, cfg.spatial_grid(refine), cfg.time_grid(refine), opts.scheme, opts)
    report = complementarity_report(value, ctx.model, ctx.problem, opts)
    regions = extract_regions(value, ctx.problem, opts.contact_tolerance(value.times))
    return SolveResult(value, report, regions)


def region_counts(regions: StoppingRegions) -> Dict[str, int]:
    return {"upper_nodes": int(regions.upper_mask.sum()), "lower_nodes": int(regions.lower_mask.sum())}


def versions() -> Dict[str, str]:
    found = {"dynkinlab": __version__}
    for name in ("numpy", "scipy", "pandas"):
        try:
            found[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            found[name] = "unknown"
    return found


def verdict(passed: bool) -> Tuple[str, int]:
    return ("PASS", EXIT_PASS) if passed else ("FAIL", EXIT_FAIL)
