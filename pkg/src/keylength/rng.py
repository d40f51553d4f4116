"""Counter-based, splittable random streams.

Every random draw in the package comes from ``substream(seed, tag, *index)``.
The stream is a Philox generator keyed by the master seed, a stable hash of
the purpose tag and an arbitrary tuple of integers (trial block, key index,
...). Two calls with the same arguments return identical streams, whatever
the order or the thread in which they happen.
"""
from __future__ import annotations

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def substream(seed: int, tag: str, *index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK,
                                spawn_key=(tag_id(tag),) + tuple(int(i) for i in index))
    return np.random.Generator(np.random.Philox(ss))


def blocks(total: int, block_size: int):
    """Split ``total`` trials into ``(block_index, count)`` pairs of fixed size.

    The split depends only on ``total`` and ``block_size`` so results never
    depend on the number of workers.
    """
    out = []
    start = 0
    b = 0
    while start < total:
        n = min(block_size, total - start)
        out.append((b, n))
        start += n
        b += 1
    return out
