"""Seeded determinism primitives: FNV-1a hashing and a splitmix64 stream.

Everything stochastic in this package (mock embeddings, white noise, sweep
seed derivation) is built on these two primitives so that a fixed seed
reproduces outputs bit for bit, independent of process, platform word
order, or worker scheduling.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

FNV1A_OFFSET = 0xCBF29CE484222325
FNV1A_PRIME = 0x100000001B3

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MIX_MUL_1 = 0xBF58476D1CE4E5B9
_MIX_MUL_2 = 0x94D049BB133111EB


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = FNV1A_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV1A_PRIME) & MASK64
    return h


def splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """First `count` outputs of a splitmix64 generator seeded with `seed`.

    The i-th internal state is seed + i*gamma (mod 2^64), so the whole
    stream can be produced vectorized while staying identical to the
    scalar reference loop.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & MASK64) + idx * np.uint64(_SPLITMIX_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_MUL_1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_MUL_2)
    return z ^ (z >> np.uint64(31))


def units_signed(words: np.ndarray) -> np.ndarray:
    """Map u64 words to doubles in [-1, 1) using the top 53 bits."""
    return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53 * 2.0 - 1.0


def gaussian_stream(seed: int, count: int, sigma: float = 1.0) -> np.ndarray:
    """Deterministic zero-mean Gaussian samples via Box-Muller.

    Consecutive word pairs (u1, u2) produce (z0, z1) in that order:
    z0 = r*cos(2*pi*u2), z1 = r*sin(2*pi*u2) with r = sqrt(-2*ln(u1)).
    u1 is mapped to (0, 1] so the log never sees zero.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    pairs = (count + 1) // 2
    words = splitmix64_stream(seed, 2 * pairs)
    u1 = ((words[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (words[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = radius * np.cos(theta)
    out[1::2] = radius * np.sin(theta)
    return sigma * out[:count]


def derive_seed(base_seed: int, label: str) -> int:
    """Stable per-record seed: base XOR FNV-1a of the record label."""
    return (base_seed ^ fnv1a_64(label.encode("utf-8"))) & MASK64
