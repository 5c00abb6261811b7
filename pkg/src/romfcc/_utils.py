"""Deterministic random-stream derivation shared across the package.

Every stochastic routine takes an integer seed and derives independent
child streams from it through ``numpy.random.SeedSequence``, so results
are reproducible bit for bit and never depend on wall-clock entropy.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"rng key must be int or str, got {type(key)!r}")


def seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    """SeedSequence for (seed, *keys); stable across runs and platforms."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_key_to_int(k) for k in keys]
    return np.random.SeedSequence(entropy)


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Generator seeded from (seed, *keys)."""
    return np.random.default_rng(seed_sequence(seed, *keys))


def derive_seed(seed: int, *keys) -> int:
    """A plain integer child seed for APIs that take seeds, not generators."""
    return int(seed_sequence(seed, *keys).generate_state(1, np.uint64)[0])


def spawn_rngs(seed: int, n: int, *keys) -> list[np.random.Generator]:
    """n independent generators derived from (seed, *keys)."""
    children = seed_sequence(seed, *keys).spawn(n)
    return [np.random.default_rng(c) for c in children]
