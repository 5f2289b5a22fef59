#!/usr/bin/env python3
"""CLI for Euler-Maruyama path ensembles."""

from typing import Optional, Sequence

from ..core.sde import simulate_paths, terminal_moments
from ..data.export import write_json, write_paths
from ..data.models import TimeGrid
from ..errors import ConfigError
from .common import EXIT_PASS, RunContext, build_parser, run


def _simulate(ctx: RunContext) -> int:
    cfg = ctx.config
    if cfg.audit is None:
        raise ConfigError("simulate needs an [audit] section with the start point (s, x)", "audit")
    s, x = cfg.audit.s, cfg.audit.x
    grid = TimeGrid.uniform(s, cfg.problem.horizon, cfg.mc.n_steps)
    bundle = simulate_paths(ctx.model, s, x, grid, cfg.mc.n_paths, cfg.mc.seed, ctx.threads)
    target = write_paths(ctx.out_dir, bundle, cfg.config_hash, cfg.mc.path_format)
    moments = terminal_moments(bundle)
    write_json(ctx.out_dir / "moments.json", {"start": {"s": s, "x": list(x)}, "terminal": moments},
               cfg.config_hash)
    print(f"Simulated {bundle.n_paths} paths of {bundle.model_id} on {grid.n_steps} steps")
    print(f"E[X_T] ~ {moments['mean']}, Var[X_T] ~ {moments['variance']}")
    print(f"Paths saved to {target}")
    return EXIT_PASS


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser("dynkinlab simulate", "Simulate a seeded path ensemble from the audit start point")
    return run(_simulate, parser, argv)


if __name__ == "__main__":
    raise SystemExit(main())
