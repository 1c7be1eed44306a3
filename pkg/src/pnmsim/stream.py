"""Synthetic decode-time query streams with tunable temporal locality.

q_{t+1} = locality * q_t + (1 - locality) * drift * fresh_gaussian, then
renormalized to unit length. locality=1 freezes the stream; locality=0
gives i.i.d. queries and maximal page churn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Rng

DEFAULT_LOCALITY = 0.9
DEFAULT_DRIFT = 1.0


@dataclass(frozen=True)
class StreamParams:
    seed: int
    length: int
    locality: float = DEFAULT_LOCALITY
    drift: float = DEFAULT_DRIFT

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if not 0.0 <= self.locality <= 1.0:
            raise ValueError("locality must lie in [0, 1]")
        if self.drift < 0.0:
            raise ValueError("drift must be non-negative")


def gen_stream(params: StreamParams, d_h: int) -> np.ndarray:
    """length x d_h matrix of query vectors; fully determined by the seed."""
    if d_h < 1:
        raise ValueError("d_h must be >= 1")
    fresh = Rng(params.seed).derive("query-stream").normal_matrix(params.length, d_h)
    out = np.empty((params.length, d_h), dtype=np.float64)
    q = None
    for t in range(params.length):
        if q is None:
            q = fresh[t].copy()
        else:
            q = params.locality * q + (1.0 - params.locality) * params.drift * fresh[t]
        norm = float(np.linalg.norm(q))
        if norm > 0.0:
            q = q / norm
        out[t] = q
    return out
