#!/usr/bin/env python3
"""CLI for the full verification pipeline.

Solves the problem, audits the hitting-time pair at the configured start
point, compares finite strategy menus and runs both martingale checks on
the solved value function.  Exit code 0 only if every sub-report passes.
"""

from typing import Optional, Sequence

from ..analysis.game import (MonteCarloConfig, Player, default_challengers, evaluate_on_bundle, hitting_strategy,
                             menu_values, saddle_audit, simulate_for)
from ..analysis.martingale import (CandidateFunction, MartingaleConfig, Role, check_subsolution,
                                   check_supersolution)
from ..data.export import write_json, write_payoff_samples, write_surface
from ..errors import ConfigError
from .common import RunContext, build_parser, region_counts, run, solve_config, verdict, versions


def _verify(ctx: RunContext) -> int:
    cfg = ctx.config
    audit_cfg = cfg.audit
    if audit_cfg is None:
        raise ConfigError("verify needs an [audit] section", "audit")
    model, problem = ctx.model, ctx.problem

    solved = solve_config(ctx)
    v, regions = solved.value, solved.regions
    write_surface(ctx.out_dir, v, regions, cfg.config_hash, formats=cfg.output.formats)

    mc = MonteCarloConfig(cfg.mc.n_paths, cfg.mc.seed, cfg.mc.n_steps, ctx.threads)
    s, x = audit_cfg.s, audit_cfg.x
    challengers = default_challengers(problem, v, regions, s, audit_cfg.shifts)
    audit = saddle_audit(model, problem, v, regions, s, x, challengers, mc, audit_cfg.scheme_tolerance)

    tau_star = hitting_strategy(regions, v, Player.MAXIMIZER_TAU, problem)
    rho_star = hitting_strategy(regions, v, Player.MINIMIZER_RHO, problem)
    tau_menu = [tau_star] + [c for c in challengers if c.player is Player.MAXIMIZER_TAU]
    rho_menu = [rho_star] + [c for c in challengers if c.player is Player.MINIMIZER_RHO]
    menu = menu_values(model, problem, s, x, tau_menu, rho_menu, mc)

    if audit_cfg.per_path_samples:
        bundle = simulate_for(model, problem, s, x, mc)
        sample = evaluate_on_bundle(bundle, problem, tau_star, rho_star)
        write_payoff_samples(ctx.out_dir / "payoff_samples.csv", bundle.grid.nodes, sample.tau_index,
                             sample.rho_index, sample.payoffs)

    mcfg = MartingaleConfig(n_paths=audit_cfg.martingale_paths, n_start_times=audit_cfg.martingale_starts,
                            seed=cfg.mc.seed, n_steps=audit_cfg.martingale_steps, t0=0.0,
                            z_threshold=cfg.mc.z_threshold, pointwise_tol=audit_cfg.pointwise_tol,
                            contact_tol=audit_cfg.pointwise_tol, threads=ctx.threads)
    box = cfg.box(audit_cfg.box_margin)
    super_report = check_supersolution(CandidateFunction.from_grid(v, Role.SUPERSOLUTION), model, problem, box, mcfg)
    sub_report = check_subsolution(CandidateFunction.from_grid(v, Role.SUBSOLUTION), model, problem, box, mcfg)

    checks = {
        "complementarity": solved.report.passed,
        "saddle_audit": audit.passed,
        "menu_ordering": menu.passed,
        "supersolution": super_report.passed,
        "subsolution": sub_report.passed,
    }
    passed = all(checks.values())
    write_json(ctx.out_dir / "verify.json", {
        "checks": checks,
        "passed": passed,
        "residual_report": solved.report,
        "regions": region_counts(regions),
        "audit": audit,
        "menu": menu,
        "martingale": {"supersolution": super_report, "subsolution": sub_report},
        "metadata": {"versions": versions(), "scheme": v.scheme, "seed": cfg.mc.seed},
    }, cfg.config_hash)

    label, code = verdict(passed)
    print(f"Verification of {cfg.source}")
    for name, ok in checks.items():
        print(f"  {'ok  ' if ok else 'FAIL'} {name}")
    print(f"J(tau*, rho*) = {audit.value_estimate.mean:.5f} +/- {audit.value_estimate.std_error:.2g}, "
          f"v(s, x) = {audit.pde_value:.5f}")
    print(f"{label}: results saved to {ctx.out_dir}")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser("dynkinlab verify", "Solve, audit the saddle point and test the value function",
                          "Examples:\n  %(prog)s --config configs/symmetric_game.toml --threads 4\n")
    return run(_verify, parser, argv)


if __name__ == "__main__":
    raise SystemExit(main())
