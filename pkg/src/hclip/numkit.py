"""Deterministic random streams and dense vector helpers.

Vectors are plain 1-D numpy float64 arrays; ``vector`` validates finiteness on
construction. Randomness flows through ``RngStream``, a thin wrapper around
numpy's counter-based Philox generator keyed by (seed, stream_id), so streams
for different trials are independent and order-independent.

Gaussian sampling goes through the inverse CDF applied to uniform draws. This
fixes the sampling method precisely: any reimplementation that consumes the
same uniforms through the same transform reproduces the moments (bit-exactness
across platforms is not a goal).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .errors import InvalidDimensionError

__all__ = ["vector", "norm", "RngStream", "gaussian_vector"]


def vector(entries) -> np.ndarray:
    """Build a dense vector, rejecting NaN/inf entries and zero length."""
    v = np.asarray(entries, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise InvalidDimensionError(f"expected a 1-D vector with d >= 1, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidDimensionError("vector entries must be finite")
    return v


def norm(v: np.ndarray) -> float:
    """Euclidean norm, nonzero for any nonzero vector.

    Rescales by the largest magnitude so squaring cannot underflow tiny
    entries to an exact zero.
    """
    n = float(np.sqrt(np.dot(v, v)))
    if n > 0.0:
        return n
    m = float(np.max(np.abs(v)))
    if m == 0.0:
        return 0.0
    w = v / m
    return m * float(np.sqrt(np.dot(w, w)))


class RngStream:
    """Counter-based random stream owned by a single trial.

    Two streams with equal (seed, stream_id) produce identical sequences;
    distinct stream_ids give statistically independent streams. The stream
    also keeps per-purpose draw counters so callers can assert how much
    randomness an operation consumed.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self.gaussian_vector_calls = 0
        self.noise_draws = 0

    def uniform(self, size) -> np.ndarray:
        """Uniform draws on (0, 1] (open at zero so U**(-1/p) is finite)."""
        return 1.0 - self._gen.random(size)

    def spawn_like(self) -> "RngStream":
        """Fresh stream with the same key, rewound to the start."""
        return RngStream(self.seed, self.stream_id)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def gaussian_vector(rng: RngStream, d: int, sigma: float) -> np.ndarray:
    """d i.i.d. draws from N(0, sigma^2) via the inverse-CDF transform.

    sigma = 0 returns the zero vector without consuming randomness, so
    DP-free runs stay aligned with reference loops on the same stream.
    """
    if d < 1:
        raise InvalidDimensionError("dimension must be >= 1")
    rng.gaussian_vector_calls += 1
    if sigma == 0.0:
        return np.zeros(d)
    return sigma * _ndtri_open(rng.uniform(d))


def standard_normals(rng: RngStream, shape) -> np.ndarray:
    """Bulk N(0,1) draws (same inverse-CDF transform as gaussian_vector)."""
    return _ndtri_open(rng.uniform(shape))


def _ndtri_open(u: np.ndarray) -> np.ndarray:
    # uniform() is open at 0 but closed at 1; pull the endpoint in so the
    # inverse CDF stays finite.
    return ndtri(np.minimum(u, 1.0 - 2.0 ** -53))
