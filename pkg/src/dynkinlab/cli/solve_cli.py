#!/usr/bin/env python3
"""CLI for the grid solver."""

from typing import Optional, Sequence

from ..data.export import write_json, write_surface
from .common import RunContext, build_parser, region_counts, run, solve_config, verdict


def _solve(ctx: RunContext) -> int:
    cfg = ctx.config
    result = solve_config(ctx)
    write_surface(ctx.out_dir, result.value, result.regions, cfg.config_hash, formats=cfg.output.formats)
    opts = cfg.grid.solver
    write_json(ctx.out_dir / "solve.json", {
        "scheme": opts.scheme,
        "tolerances": {"psor_tol": opts.psor_tol, "max_iter": opts.max_iter, "omega": opts.omega,
                       "tol_pde": opts.tol_pde, "contact_eps": result.regions.tolerance},
        "residual_report": result.report,
        "regions": region_counts(result.regions),
        "single_obstacle": ctx.problem.single_obstacle,
    }, cfg.config_hash)

    label, code = verdict(result.report.passed)
    print(f"Solved {cfg.source}: residual {result.report.max_interior_residual:.3g} "
          f"(tol {opts.tol_pde:g}), sign violations {result.report.region_sign_violations} -> {label}")
    if cfg.audit is not None:
        print(f"v({cfg.audit.s:g}, {list(cfg.audit.x)}) = {result.value.value_at(cfg.audit.s, cfg.audit.x):.6f}")
    print(f"Results saved to {ctx.out_dir}")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser("dynkinlab solve", "Solve the double obstacle problem on the configured grid",
                          "Examples:\n  %(prog)s --config configs/heat_cosine.toml --out out/heat\n")
    return run(_solve, parser, argv)


if __name__ == "__main__":
    raise SystemExit(main())
