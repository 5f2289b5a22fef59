#!/usr/bin/env python3
"""CLI for the sampled linear-growth check of the model coefficients."""

from typing import Optional, Sequence

from ..core.sde import verify_growth
from ..data.export import write_json
from .common import RunContext, build_parser, run, verdict


def _check_growth(ctx: RunContext) -> int:
    cfg = ctx.config
    report = verify_growth(ctx.model, cfg.grid.lo, cfg.grid.hi, cfg.mc.growth_samples, cfg.mc.seed,
                           (0.0, cfg.problem.horizon))
    write_json(ctx.out_dir / "growth.json", {"model": ctx.model.name, "report": report}, cfg.config_hash)
    label, code = verdict(report.passed)
    print(f"Growth ratio of {ctx.model.name}: max {report.max_ratio:.4g} at x={list(report.witness)}, "
          f"t={report.witness_time:.4g} over {report.n_samples} samples -> {label}")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser("dynkinlab check-growth", "Sample the box and check |b| + |sigma| <= C (1 + |x|)")
    return run(_check_growth, parser, argv)


if __name__ == "__main__":
    raise SystemExit(main())
