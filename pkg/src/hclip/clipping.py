"""Radial clipping operator and its analysis-side diagnostics."""

from __future__ import annotations

import numpy as np

from .errors import InvalidDimensionError
from .numkit import norm

__all__ = ["clip", "clip_factor_c", "theta"]


def clip(v: np.ndarray, lam: float) -> np.ndarray:
    """Project v onto the ball of radius lam: min{1, lam/||v||} * v.

    Preserves direction; the zero vector maps to itself. lam = inf is the
    identity (the unclipped sentinel).
    """
    n = norm(v)
    if n <= lam:
        return v
    return v * (lam / n)


def clip_factor_c(grad_norm: float, lam: float) -> float:
    """min{1, lam / (2 * grad_norm)}, with the convention c = 1 at zero norm."""
    if grad_norm <= 0.0:
        return 1.0
    return min(1.0, lam / (2.0 * grad_norm))


def theta(g_hat: np.ndarray, grad: np.ndarray, lam: float) -> np.ndarray:
    """Deviation of the clipped sample from the scaled true gradient.

    Diagnostics only; the update itself never needs it.
    """
    if g_hat.shape != grad.shape:
        raise InvalidDimensionError(f"shape mismatch: {g_hat.shape} vs {grad.shape}")
    c = clip_factor_c(norm(grad), lam)
    return g_hat - c * grad
