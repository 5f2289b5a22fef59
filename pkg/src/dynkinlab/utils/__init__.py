"""Utility functions and helpers."""

from .streams import (
    GROWTH_STREAM,
    MARTINGALE_STREAM,
    PATH_BLOCK_SIZE,
    blocks,
    derive_rng,
    derive_seed,
    ordered_map,
)

__all__ = [
    "GROWTH_STREAM",
    "MARTINGALE_STREAM",
    "PATH_BLOCK_SIZE",
    "blocks",
    "derive_rng",
    "derive_seed",
    "ordered_map",
]
