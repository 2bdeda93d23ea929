"""Deterministic seed derivation for parallel-safe experiment replication.

Every generator and Monte Carlo routine in this package takes an explicit
integer seed. The harness derives per-cell seeds from a single base seed with
a splitmix64-style mixer so that trials and grid cells get independent,
reproducible streams regardless of execution order.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def _splitmix64(state: int) -> int:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(base_seed: int, *keys: int | str) -> int:
    """Derive a child seed from ``base_seed`` and a sequence of keys.

    Keys may be ints or short strings (hashed bytewise). The result fits in
    63 bits so it is a valid seed for ``numpy.random.default_rng``.
    """
    state = base_seed & _MASK
    for key in keys:
        if isinstance(key, str):
            for byte in key.encode("utf-8"):
                state = _splitmix64(state ^ byte)
        else:
            state = _splitmix64(state ^ (int(key) & _MASK))
    return _splitmix64(state) >> 1
