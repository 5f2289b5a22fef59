"""Seed derivation and deterministic fan-out helpers.

Every random stream in dynkinlab is derived from a single user seed with
``numpy.random.SeedSequence`` and an explicit spawn key, so results never
depend on how work is scheduled across threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# Paths are generated in fixed-size blocks; block b always draws from the
# stream keyed (seed, b), whatever the worker count.
PATH_BLOCK_SIZE = 4096

# Spawn-key prefixes for streams that are not path blocks.
MARTINGALE_STREAM = 1
GROWTH_STREAM = 2


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Return a Philox generator for the stream ``(seed, key...)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Collapse the stream ``(seed, key...)`` to a fresh 64-bit integer seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: Optional[int] = None) -> List[R]:
    """Apply ``fn`` to ``items`` on a thread pool, returning results in input order.

    ``threads`` of ``None`` or ``1`` runs inline.
    """
    items = list(items)
    if not threads or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))


def blocks(n: int, size: int = PATH_BLOCK_SIZE) -> Iterable[tuple[int, int, int]]:
    """Yield ``(block_index, start, stop)`` covering ``range(n)``."""
    for b, start in enumerate(range(0, n, size)):
        yield b, start, min(start + size, n)
