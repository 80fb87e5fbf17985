"""Gaussian-mechanism noise calibration for an (epsilon, delta) target.

Two regimes are supported:

* ``expectation``: advanced composition over K releases,
  sigma_omega = c_dp * (lam / eps) * sqrt(K * ln(K/delta) * ln(1/delta));
* ``finite-sum``: subsampled finite-sum scaling with sampling ratio q,
  sigma_omega = c_dp * (q * lam / eps) * sqrt(K * ln(1/delta)).

Only the order of these expressions is dictated by the analysis; the leading
constant is exposed as ``c_dp`` (default 1) so experiments state it explicitly
rather than bake it in silently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import InvalidTargetError

__all__ = ["PrivacyTarget", "calibrate_sigma_omega", "invert_lambda_budget"]

_REGIMES = ("expectation", "finite-sum")


@dataclass(frozen=True)
class PrivacyTarget:
    epsilon: float
    delta: float
    K: int
    regime: str = "expectation"
    q: float | None = None
    c_dp: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise InvalidTargetError("epsilon must be positive")
        if not (0.0 < self.delta < 1.0):
            raise InvalidTargetError("delta must lie in (0, 1)")
        if self.K < 1:
            raise InvalidTargetError("K must be a positive integer")
        if self.regime not in _REGIMES:
            raise InvalidTargetError(f"regime must be one of {_REGIMES}")
        if self.c_dp <= 0.0:
            raise InvalidTargetError("c_dp must be positive")
        if self.regime == "finite-sum":
            if self.q is None or not (0.0 < self.q <= 1.0):
                raise InvalidTargetError("finite-sum regime requires q in (0, 1]")
            # applicability condition, not a formula: eps should be O(q^2 K)
            if self.epsilon > self.c_dp * self.q ** 2 * self.K:
                warnings.warn(
                    "finite-sum calibration assumes epsilon = O(q^2 K); "
                    f"epsilon={self.epsilon} exceeds c_dp*q^2*K="
                    f"{self.c_dp * self.q ** 2 * self.K}",
                    stacklevel=3,
                )


def calibrate_sigma_omega(target: PrivacyTarget, lam: float) -> float:
    """Gaussian noise scale achieving the target over K clipped releases."""
    if target.regime == "expectation":
        return (target.c_dp * lam / target.epsilon
                * math.sqrt(target.K * math.log(target.K / target.delta)
                            * math.log(1.0 / target.delta)))
    return (target.c_dp * target.q * lam / target.epsilon
            * math.sqrt(target.K * math.log(1.0 / target.delta)))


def invert_lambda_budget(target: PrivacyTarget, sigma_omega: float) -> float:
    """Clipping level whose calibrated noise scale equals sigma_omega."""
    if sigma_omega <= 0.0:
        raise InvalidTargetError("sigma_omega must be positive")
    return sigma_omega / calibrate_sigma_omega(target, 1.0)
