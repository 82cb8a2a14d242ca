"""Seeded random stream derivation"""
import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream key must be nonnegative, got {key}")
        return int(key)
    # Stable across interpreter runs, unlike hash()
    return zlib.crc32(str(key).encode("utf-8"))


def derive_rng(master_seed: int, *keys) -> np.random.Generator:
    """Derive an independent generator for (master_seed, *keys)

    Keys form the spawn counter of a SeedSequence, so e.g. derive_rng(7, "sweep", 3, 0)
    is the same stream on every run and independent of derive_rng(7, "sweep", 3, 1).
    """
    spawn_key = tuple(_key_to_int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master_seed), spawn_key=spawn_key))


__all__ = ('derive_rng', )
