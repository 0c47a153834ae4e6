"""Counter-based random streams derived from a single root seed.

A stream is identified by (root seed, tag, *counters) and backed by a Philox
generator, so replicate block k of a calibration always sees the same bits
no matter how many blocks exist or which worker runs it.
"""

from __future__ import annotations

import zlib

import numpy as np

BLOCK_SIZE = 250


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, tag: str, *counters: int) -> np.random.Generator:
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence(seed, spawn_key=(_tag_key(tag), *map(int, counters)))
    return np.random.Generator(np.random.Philox(ss))


def blocks(total: int, size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    """(block index, rows) pairs covering `total` replicates in fixed-size blocks."""
    out = []
    k = 0
    while k * size < total:
        out.append((k, min(size, total - k * size)))
        k += 1
    return out


def entropy_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2**63))
