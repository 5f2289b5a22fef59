#!/usr/bin/env python3
"""Main CLI entry point for the dynkinlab package."""

import sys

from .cli.bench_cli import main as bench_main
from .cli.growth_cli import main as growth_main
from .cli.simulate_cli import main as simulate_main
from .cli.solve_cli import main as solve_main
from .cli.verify_cli import main as verify_main

COMMANDS = {
    "solve": solve_main,
    "simulate": simulate_main,
    "verify": verify_main,
    "bench": bench_main,
    "check-growth": growth_main,
}


def main():
    """Main entry point that routes to appropriate CLI based on command."""
    if len(sys.argv) < 2 or sys.argv[1] not in COMMANDS:
        if len(sys.argv) >= 2:
            print(f"Unknown command: {sys.argv[1]}")
        print("Usage: dynkinlab <command> --config PATH [--out DIR] [--threads N] [--quiet]")
        print("Commands:")
        print("  solve         - Solve the obstacle problem on the grid")
        print("  simulate      - Simulate a path ensemble")
        print("  verify        - Full verification pipeline")
        print("  bench         - Grid-refinement study against an oracle")
        print("  check-growth  - Sampled linear-growth check")
        sys.exit(2)

    command = sys.argv[1]
    sys.exit(COMMANDS[command](sys.argv[2:]))


if __name__ == "__main__":
    main()
