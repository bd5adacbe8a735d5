"""Counter-based random streams keyed by (seed, purpose tag, index...).

Every stochastic routine takes its randomness from a keyed stream, so the
draws belonging to rollout ``i`` of iteration ``k`` are the same no matter
how rollouts are scheduled across workers.
"""
from __future__ import annotations

import functools
import zlib

import numpy as np


def tag_code(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


@functools.lru_cache(maxsize=4096)
def _philox_key(seed: int, tag: str, prefix: tuple[int, ...]) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(tag_code(tag),) + prefix)
    return ss.generate_state(2, np.uint64)


def stream(seed: int, tag: str, *index: int) -> np.random.Generator:
    """Return the generator for ``(seed, tag, *index)``.

    All but the last index select the Philox key; the last one is placed in
    the counter, so sibling streams are cheap to create and never overlap.
    """
    prefix = tuple(int(i) for i in index[:-1])
    last = int(index[-1]) if index else 0
    if last < 0:
        raise ValueError("stream index must be non-negative")
    key = _philox_key(int(seed), tag, prefix)
    counter = np.array([0, 0, last, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def derive_seed(seed: int, tag: str, *index: int) -> int:
    """Deterministic 63-bit child seed, e.g. one per replication."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(tag_code(tag),) + tuple(int(i) for i in index))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
