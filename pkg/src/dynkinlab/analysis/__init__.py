"""Game engine, martingale checks and reference oracles."""
