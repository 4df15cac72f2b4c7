"""
Deterministic seed derivation.

Every random draw in the package comes from numpy Generators seeded with
derive_seed(base, *keys), so results do not depend on evaluation order or
thread count.
"""

import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def derive_seed(base: int, *keys: Key) -> int:
    """Mix a base seed with integer or string keys into a new 63-bit seed."""
    entropy = [int(base) & 0xFFFFFFFF, (int(base) >> 32) & 0xFFFFFFFF]
    for key in keys:
        entropy.append(zlib.crc32(key.encode()) if isinstance(key, str) else int(key) & 0xFFFFFFFF)
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def generator(base: int, *keys: Key) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *keys))
