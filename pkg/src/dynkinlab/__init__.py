"""Dynkin-game laboratory

Numerical verification toolkit for zero-sum stopping games: simulate the
underlying diffusion, solve the double obstacle problem on a grid, play the
game on simulated paths and test candidate super-/sub-solutions.

Package Structure:
- core: SDE models, obstacle problems and the grid solver
- data: Shared dataclasses, run configuration and export writers
- analysis: Game engine, martingale checks and reference oracles
- cli: Command-line interface modules
- utils: Seed derivation and deterministic thread fan-out
"""

__version__ = "0.1.0"
