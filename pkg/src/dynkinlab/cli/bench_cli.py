#!/usr/bin/env python3
"""CLI for grid-refinement studies against a reference oracle."""

import time
from typing import Optional, Sequence

import numpy as np

from ..analysis.oracles import binomial_american_put, gaussian_expectation, heat_cosine
from ..data.export import write_json, write_table
from ..data.models import GridFunction
from ..errors import ConfigError
from .common import EXIT_PASS, RunContext, build_parser, run, solve_config


def oracle_error(ctx: RunContext, v: GridFunction, margin: float) -> float:
    """Max error of ``v(0, .)`` against the configured oracle on the inner box."""
    cfg = ctx.config
    oracle = cfg.oracle
    params = oracle.params
    T = ctx.problem.horizon
    if oracle.kind == "american_put":
        if cfg.audit is None and "x0" not in params:
            raise ConfigError("american_put oracle needs oracle.x0 or an [audit] start point", "oracle.x0")
        x0 = float(params.get("x0", cfg.audit.x[0] if cfg.audit else 1.0))
        ref = binomial_american_put(x0, float(params["strike"]), T, float(params["sigma"]),
                                    float(params.get("mu", 0.0)), int(params.get("steps", 2000)))
        return abs(v.value_at(0.0, [x0]) - ref)

    mask = v.grid.interior_mask(margin)
    pts = v.grid.points[mask]
    approx = v.values[0][mask]
    if oracle.kind == "terminal":
        ref = np.minimum(ctx.problem.upper_at(0.0, pts), np.maximum(ctx.problem.lower_at(0.0, pts),
                                                                     ctx.problem.terminal_at(pts)))
    elif oracle.kind == "heat_cosine":
        ref = heat_cosine(0.0, pts[:, 0], T, float(params.get("sigma", 1.0)))
    else:
        sigma, mu = float(params.get("sigma", 1.0)), float(params.get("mu", 0.0))
        ref = np.array([gaussian_expectation(ctx.problem.terminal_at, p[0], sigma, T, mu=mu) for p in pts])
    return float(np.max(np.abs(approx - ref))) if len(ref) else 0.0


def _bench(ctx: RunContext) -> int:
    cfg = ctx.config
    if cfg.oracle is None:
        raise ConfigError("bench needs an [oracle] section", "oracle")
    rows = []
    for level in range(cfg.bench.levels):
        start = time.perf_counter()
        solved = solve_config(ctx, refine=level)
        runtime = time.perf_counter() - start
        error = oracle_error(ctx, solved.value, cfg.bench.margin)
        rows.append({"level": level, "nodes": "x".join(map(str, solved.value.grid.shape)),
                     "time_steps": solved.value.times.n_steps, "max_error": error, "runtime_s": runtime})
        print(f"level {level}: grid {rows[-1]['nodes']} x {rows[-1]['time_steps']} steps, "
              f"max error {error:.3e} ({runtime:.2f}s)")
    table = write_table(ctx.out_dir / "bench.csv", rows)
    write_json(ctx.out_dir / "bench.json", {"oracle": cfg.oracle.kind, "levels": cfg.bench.levels},
               cfg.config_hash)
    print(f"Convergence table saved to {table}")
    return EXIT_PASS


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser("dynkinlab bench", "Grid-refinement study against the configured oracle")
    return run(_bench, parser, argv)


if __name__ == "__main__":
    raise SystemExit(main())
