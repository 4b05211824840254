"""Deterministic splittable random streams.

Replicated experiments index every scalar draw by a tuple of non-negative
integers (replicate, role, item, ...) and hash it, together with the run
seed, through a SplitMix64 chain:

    state = F(seed + G)
    state = F(state ^ (index_1 * G + 1))
    ...
    state = F(state ^ (index_k * G + 1))

where ``F`` is the SplitMix64 finalizer and ``G = 0x9E3779B97F4A7C15``.
The top 53 bits of the final state map to a double in (0, 1).  Because a
draw depends only on ``(seed, indices)``, results are invariant under
replicate count, chunking, and thread schedule.  Cross-run determinism
holds within this implementation; bit-equality across ports is a non-goal.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer on a plain Python integer."""
    z = (x + GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _finalize(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def hash_u64(seed: int, *indices) -> np.ndarray:
    """Hash (seed, *indices) to uint64, broadcasting over index arrays."""
    arrays = [np.asarray(ix, dtype=np.uint64) for ix in indices]
    shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
    with np.errstate(over="ignore"):
        state = _finalize(
            np.broadcast_to(np.uint64((seed + GOLDEN) & _MASK), shape).copy()
        )
        for a in arrays:
            state = _finalize(state ^ (a * np.uint64(GOLDEN) + np.uint64(1)))
    return state


def uniforms(seed: int, *indices) -> np.ndarray:
    """Uniform(0,1) doubles indexed by (seed, *indices); never exactly 0 or 1."""
    h = hash_u64(seed, *indices)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(seed: int, *indices) -> np.ndarray:
    """Standard normal draws indexed by (seed, *indices)."""
    return ndtri(uniforms(seed, *indices))


def child_seed(seed: int, *indices) -> int:
    """A derived 64-bit seed for the named substream."""
    state = splitmix64(seed)
    for ix in indices:
        state = splitmix64(state ^ ((int(ix) * GOLDEN + 1) & _MASK))
    return state


def rng_for(seed: int, *indices) -> np.random.Generator:
    """A numpy Generator for a named substream (non-vectorized paths)."""
    return np.random.default_rng(child_seed(seed, *indices))
