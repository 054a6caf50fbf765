"""Seeded random streams.

Every stochastic routine draws from numpy's PCG64 bit generator, whose output
is specified bit-for-bit and identical across platforms. Independent shards
(one per instance, trial block, or worker) come from ``SeedSequence`` spawn
keys, so results never depend on scheduling.
"""

from __future__ import annotations

import numpy as np

RNG_NAME = "numpy.PCG64"


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def shard_rng(seed: int | None, *index: int) -> np.random.Generator:
    """Stream for (master seed, shard index...)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(rng) -> tuple[np.random.Generator, int | None]:
    """Accept a Generator, an int seed or None; return (generator, seed-if-known)."""
    if isinstance(rng, np.random.Generator):
        return rng, None
    if rng is None or isinstance(rng, (int, np.integer)):
        seed = None if rng is None else int(rng)
        return make_rng(seed), seed
    raise TypeError(f"expected Generator or int seed, got {type(rng).__name__}")
