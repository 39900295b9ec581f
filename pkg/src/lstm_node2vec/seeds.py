"""Deterministic RNG derivation from a single master seed.

Every random choice in the package flows from one integer seed. Sub-streams
are derived from (master_seed, key parts) through ``numpy.random.SeedSequence``
so that e.g. walk generation for node 17, walk 3 draws from the same stream
regardless of generation order, thread count, or how many draws other
components consumed.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    if isinstance(part, str):
        # crc32 is stable across platforms and Python processes, unlike hash()
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"seed key parts must be int or str, got {type(part).__name__}")


def seed_sequence(master_seed: int, *key) -> np.random.SeedSequence:
    entropy = [int(master_seed) & _MASK64]
    entropy.extend(_key_part(p) for p in key)
    return np.random.SeedSequence(entropy)


def child_rng(master_seed: int, *key) -> np.random.Generator:
    """Independent generator for the sub-stream identified by ``key``."""
    return np.random.default_rng(seed_sequence(master_seed, *key))


def child_int(master_seed: int, *key) -> int:
    """A single derived 32-bit seed (for consumers that want a plain int)."""
    return int(seed_sequence(master_seed, *key).generate_state(1)[0])
