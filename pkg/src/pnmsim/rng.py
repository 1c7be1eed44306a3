"""Portable counter-based random streams.

Draw ``i`` of a stream with seed ``s`` is the SplitMix64 finalizer applied to
``(s + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64``:

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

Uniforms take the top 53 bits (``u = (z >> 11) * 2**-53``, in [0, 1)).
Gaussians use Box-Muller on consecutive counter pairs (2k, 2k+1):

    z0 = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
    z1 = sqrt(-2 ln(1 - u1)) * sin(2 pi u2)

All draws are counter-indexed in fixed order. The integer and uniform
stages are bit-exact in any implementation of this scheme; the Gaussian
stage additionally depends on the platform's log/cos/sin rounding, so ports
agree to within an ulp or two rather than bit-for-bit.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_DERIVE_SALT = 0xD1B54A32D192ED03


def _finalize(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def mix64(value: int) -> int:
    """One SplitMix64 finalizer pass over a 64-bit integer."""
    z = value & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


_STRING_TAG_BASE = 0xA5A5A5A5A5A5A5A5  # keeps short strings off small-int tags


def _tag_value(tag) -> int:
    # string tags fold their UTF-8 bytes through the finalizer, one per pass
    if isinstance(tag, int):
        return tag
    h = _STRING_TAG_BASE ^ len(tag)
    for byte in tag.encode("utf-8"):
        h = mix64((h + byte + _DERIVE_SALT) & 0xFFFFFFFFFFFFFFFF)
    return h


def derive_seed(seed: int, *tags) -> int:
    """Deterministic sub-seed for an independent stream named by ``tags``.

    Tags may be integers or short strings; both map through the SplitMix64
    finalizer so any port of this scheme derives identical sub-seeds.
    """
    s = seed & 0xFFFFFFFFFFFFFFFF
    for tag in tags:
        s = mix64(s ^ mix64((_tag_value(tag) + _DERIVE_SALT) & 0xFFFFFFFFFFFFFFFF))
    return s


class Rng:
    """Seedable counter-based generator (SplitMix64 + Box-Muller)."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self.counter = counter

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return _finalize((np.uint64(self.seed) + idx * _GAMMA) & _MASK)

    def uniform(self, n: int) -> np.ndarray:
        """n uniforms in [0, 1)."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        """n standard-normal deviates; consumes 2*ceil(n/2) counters."""
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = 2.0 * math.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normal(rows * cols).reshape(rows, cols)

    def derive(self, *tags) -> "Rng":
        return Rng(derive_seed(self.seed, *tags))
