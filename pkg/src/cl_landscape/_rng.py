"""Seeded random streams.

All randomness goes through numpy's Philox4x64 counter-based bit generator,
keyed by a ``SeedSequence`` built from a master seed and an integer path.
Two calls with the same ``(seed, *stream)`` yield identical streams on every
platform, and independent work units (trials, sweep cells, restarts) get
their own stream by appending their index rather than sharing one
generator, so scheduling order never changes results.
"""

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _entropy(seed, stream):
    words = []
    for item in (seed, *stream):
        if isinstance(item, str):
            item = fnv1a64(item.encode("utf-8"))
        item = int(item)
        if item < 0:
            raise ValueError(f"seed components must be nonnegative, got {item}")
        words.append(item)
    return words


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Return a Philox-backed generator for ``seed`` and a substream path.

    ``stream`` items may be nonnegative ints or strings (hashed with
    FNV-1a).
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_entropy(seed, stream))))


def derive_seed(seed: int, *stream) -> int:
    """A 64-bit child seed, i.e. ``hash(master_seed, work_index)``."""
    state = np.random.SeedSequence(_entropy(seed, stream)).generate_state(1, np.uint64)
    return int(state[0])
