"""Deterministic named RNG substreams.

Every random draw in the package flows from one root seed through a
substream named by a tuple of keys (strings or integers).  Streams for
distinct key tuples are independent, so adding a method, grid cell or
trial never perturbs the draws of existing ones, and parallel and serial
execution see the same numbers.
"""

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    if isinstance(key, float):
        # floats appear in keys via alpha grids; repr is stable
        return zlib.crc32(repr(key).encode("utf-8"))
    return zlib.crc32(str(key).encode("utf-8"))


def substream(seed, *keys) -> np.random.Generator:
    """Generator for (seed, *keys), stable across runs and platforms."""
    spawn = tuple(_key_to_int(k) for k in keys)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn)
    return np.random.default_rng(ss)


def child_seed(rng: np.random.Generator) -> int:
    """Draw a fresh integer seed from an existing stream."""
    return int(rng.integers(0, 2**31 - 1))
