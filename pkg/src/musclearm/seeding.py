"""Deterministic RNG derivation.

Every stochastic component draws from its own numpy Generator, derived
from the experiment seed plus a string key. Derivation is by hashing the
key, so adding a new stream never shifts the seeds of existing ones
(unlike SeedSequence.spawn, which is order dependent).
"""

import hashlib

import numpy as np


def derive_seed(seed: int, *keys) -> np.random.SeedSequence:
    """Stable SeedSequence for (seed, keys); keys may be str or int."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        if isinstance(key, (int, np.integer)):
            key = f"i:{int(key)}"
        digest = hashlib.sha256(str(key).encode("utf-8")).digest()
        words.append(int.from_bytes(digest[:8], "little"))
    return np.random.SeedSequence(words)


def derive_rng(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
