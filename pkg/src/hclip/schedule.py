"""Step-size formulas, regime classification, and convergence bounds.

Everything here is an exact closed form with the literal numeric constants of
the underlying analysis (42, 28, 56, 21, 14, 20, 2 - sqrt(2), sqrt(7), ...),
not the order-level simplifications. Six step-size candidates gamma_1..gamma_6
plus a smoothness ceiling apply in each of the convex and non-convex settings;
the step actually used is their minimum.

Throughout, ``radius`` means R (an upper bound on ||x0 - x*||) for convex
problems and Delta (an upper bound on f(x0) - f*) for non-convex ones. The
scale that clipping competes with is u = L*R in the convex case and
u = sqrt(L*Delta) in the non-convex case; zeta = max{0, 2u - lambda/2}
measures how hard the clip bites the true gradient.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

from .errors import InvalidTargetError, TablesNotApplicableError
from .privacy import PrivacyTarget

__all__ = [
    "TheoryParams",
    "StepsizeParts",
    "RegimeReport",
    "zeta_lambda",
    "stepsize_convex_full",
    "stepsize_convex_reduced",
    "stepsize_nonconvex_full",
    "classify_regime",
    "optimal_lambda_dp",
    "theory_bound",
]

INF = float("inf")


@dataclass(frozen=True)
class TheoryParams:
    """Problem and run constants the theory formulas consume.

    sigma is the certified noise scale (sigma_alpha ** (1/alpha)).
    """

    L: float
    radius: float  # R if convex, Delta if non-convex
    sigma: float
    alpha: float
    K: int
    beta: float
    lam: float
    sigma_omega: float = 0.0
    d: int = 1
    convex: bool = True

    def __post_init__(self):
        if self.L <= 0 or self.radius <= 0 or self.sigma <= 0 or self.lam <= 0:
            raise InvalidTargetError("L, radius, sigma, lambda must be positive")
        if not (1.0 < self.alpha <= 2.0):
            raise InvalidTargetError("alpha must lie in (1, 2]")
        if self.K < 1 or not (0.0 < self.beta <= 1.0):
            raise InvalidTargetError("K must be >= 1 and beta in (0, 1]")
        if self.sigma_omega < 0.0 or self.d < 1:
            raise InvalidTargetError("sigma_omega must be >= 0 and d >= 1")

    @property
    def grad_scale(self) -> float:
        """u = L*R (convex) or sqrt(L*Delta) (non-convex)."""
        if self.convex:
            return self.L * self.radius
        return math.sqrt(self.L * self.radius)


@dataclass(frozen=True)
class StepsizeParts:
    """The selected step-size together with every candidate that produced it."""

    gamma: float
    smoothness_cap: float
    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float
    gamma5: float
    gamma6: float

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "smoothness_cap": self.smoothness_cap,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "gamma4": self.gamma4,
            "gamma5": self.gamma5,
            "gamma6": self.gamma6,
        }

    def binding(self) -> str:
        """Name of the componentwise minimum."""
        d = self.as_dict()
        del d["gamma"]
        return min(d, key=d.get)


@dataclass(frozen=True)
class RegimeReport:
    regime_id: int
    regime_label: str
    zeta: float
    neighborhood: float
    rate_label: str
    optimal_lambda: Optional[float]
    notes: str = ""


def zeta_lambda(params: TheoryParams) -> float:
    """max{0, 2u - lambda/2} with u the convexity-dependent gradient scale."""
    return max(0.0, 2.0 * params.grad_scale - params.lam / 2.0)


def _phi(K: int, beta: float) -> float:
    return math.sqrt(3.0 * math.log(4.0 * (K + 1) / beta))


def _common_terms(p: TheoryParams):
    zeta = zeta_lambda(p)
    sa = p.sigma ** p.alpha
    za = zeta ** p.alpha
    pow2 = 2.0 ** (2.0 * p.alpha - 1.0)
    lnA = math.log(8.0 * (p.K + 1) / p.beta)   # ln(8(K+1)/beta)
    lnB = math.log(4.0 * (p.K + 1) / p.beta)   # ln(4(K+1)/beta)
    lnC = math.log((p.K + 1) / p.beta)         # ln((K+1)/beta)
    return zeta, sa, za, pow2, lnA, lnB, lnC


def _bracket(p: TheoryParams, zeta: float, sa: float, za: float, pow2: float) -> float:
    # zeta/lam + 1/2 + lam^(a-1) zeta / (2^(2a-1)(s^a + z^a)) + (1 + z^a/s^a)^(-1/a)
    return (zeta / p.lam + 0.5
            + p.lam ** (p.alpha - 1.0) * zeta / (pow2 * (sa + za))
            + (1.0 + za / sa) ** (-1.0 / p.alpha))


def stepsize_convex_full(params: TheoryParams, phi_from_beta: bool = True) -> StepsizeParts:
    """All six convex step-size candidates and their minimum with 1/(8L).

    phi_from_beta keeps the confidence inflation phi = sqrt(3 ln(4(K+1)/beta))
    inside gamma_3; disabling it sets phi = 0 (for sensitivity reporting only).
    """
    p = params
    if not p.convex:
        raise InvalidTargetError("stepsize_convex_full requires convex params")
    zeta, sa, za, pow2, lnA, lnB, lnC = _common_terms(p)
    R, K, lam, sw = p.radius, p.K, p.lam, p.sigma_omega
    phi = _phi(K, p.beta) if phi_from_beta else 0.0

    g1 = R / (42.0 * math.sqrt(pow2 + 1.0) * p.sigma ** (p.alpha / 2.0)
              * lam ** (1.0 - p.alpha / 2.0)
              * math.sqrt(6.0 * (K + 1) * lnA * (1.0 + za / sa)))
    g2 = (R * lam ** (p.alpha - 1.0)
          / (28.0 * (K + 1) * pow2 * (sa + za) * _bracket(p, zeta, sa, za, pow2)))
    g3 = INF if sw == 0.0 else R / (56.0 * sw * math.sqrt(p.d * (K + 1))
                                    * (math.sqrt(2.0) + math.sqrt(2.0) * phi))
    g4 = ((2.0 - math.sqrt(2.0)) * R
          / (lam + sw * (math.sqrt(p.d) + math.sqrt(2.0 * lnC))))
    g5 = R / (56.0 * lam * lnA)
    g6 = INF if sw == 0.0 else R / (2.0 * sw * math.sqrt(
        7.0 * ((K + 1) * p.d + 2.0 * math.sqrt((K + 1) * p.d * lnB) + 2.0 * lnB)))
    cap = 1.0 / (8.0 * p.L)
    return StepsizeParts(gamma=min(cap, g1, g2, g3, g4, g5, g6), smoothness_cap=cap,
                         gamma1=g1, gamma2=g2, gamma3=g3, gamma4=g4, gamma5=g5, gamma6=g6)


def stepsize_convex_reduced(params: TheoryParams) -> float:
    """Reduced convex rule: min{1/(8L), gamma_1, gamma_2, gamma_3}.

    gamma_4..gamma_6 become non-binding once lambda stays within
    sigma * (K / ln(K/beta))^(1/alpha); a larger lambda triggers a warning
    since the reduction is then unjustified.
    """
    p = params
    lam_cap = p.sigma * (p.K / math.log(p.K / p.beta)) ** (1.0 / p.alpha)
    if p.lam > lam_cap:
        warnings.warn(
            f"lambda={p.lam} exceeds sigma*(K/ln(K/beta))^(1/alpha)={lam_cap:.6g}; "
            "the reduced step-size rule may not dominate the full one",
            stacklevel=2,
        )
    parts = stepsize_convex_full(p)
    return min(parts.smoothness_cap, parts.gamma1, parts.gamma2, parts.gamma3)


def stepsize_nonconvex_full(params: TheoryParams) -> StepsizeParts:
    """All six non-convex step-size candidates and their minimum with 1/(4L)."""
    p = params
    if p.convex:
        raise InvalidTargetError("stepsize_nonconvex_full requires non-convex params")
    zeta, sa, za, pow2, lnA, lnB, lnC = _common_terms(p)
    K, lam, sw = p.K, p.lam, p.sigma_omega
    sqD = math.sqrt(p.radius)   # sqrt(Delta)
    sqL = math.sqrt(p.L)
    phi = _phi(K, p.beta)

    g1 = sqD / (21.0 * sqL * math.sqrt(pow2 + 1.0) * p.sigma ** (p.alpha / 2.0)
                * lam ** (1.0 - p.alpha / 2.0)
                * math.sqrt(6.0 * (K + 1) * lnA * (1.0 + za / sa)))
    g2 = (sqD * lam ** (p.alpha - 1.0)
          / (14.0 * sqL * (K + 1) * pow2 * (sa + za) * _bracket(p, zeta, sa, za, pow2)))
    g3 = INF if sw == 0.0 else sqD / (14.0 * sqL * sw * math.sqrt(p.d * (K + 1))
                                      * (math.sqrt(2.0) + math.sqrt(2.0) * phi))
    g4 = sqD / (20.0 * sqL * (lam + sw * (math.sqrt(p.d) + math.sqrt(2.0 * lnC))))
    g5 = sqD / (28.0 * lam * sqL * lnA)
    g6 = INF if sw == 0.0 else sqD / (sqL * sw * math.sqrt(
        7.0 * ((K + 1) * p.d + 2.0 * math.sqrt((K + 1) * p.d * lnB) + 2.0 * lnB)))
    cap = 1.0 / (4.0 * p.L)
    return StepsizeParts(gamma=min(cap, g1, g2, g3, g4, g5, g6), smoothness_cap=cap,
                         gamma1=g1, gamma2=g2, gamma3=g3, gamma4=g4, gamma5=g5, gamma6=g6)


_RATE_FAST = "(alpha-1)/alpha-rate to exact optimum"
_RATE_NEIGHBORHOOD = "1/sqrt(K)-rate to neighborhood"


def classify_regime(params: TheoryParams, eta: Optional[float] = None) -> RegimeReport:
    """Map (lambda, L, R or Delta, sigma, alpha) to one of the seven regimes.

    Applies only without DP noise. Boundary ties resolve toward the lower
    regime index (rows are checked top to bottom with non-strict comparisons).
    eta is the small positive offset appearing in some optimal-lambda cells;
    default 1e-3 times the gradient scale.
    """
    p = params
    if p.sigma_omega > 0.0:
        raise TablesNotApplicableError(
            "regime tables assume sigma_omega = 0; use optimal_lambda_dp instead")
    u = p.grad_scale
    if eta is None:
        eta = 1e-3 * u
    zeta = zeta_lambda(p)
    lam, sig, a = p.lam, p.sigma, p.alpha
    # order-level neighborhood prefactors: p1 + p2-weighted second term
    p1 = p.radius if p.convex else u                      # R  or sqrt(L*Delta)
    p2 = p.L * p.radius ** 2 if p.convex else p.L * p.radius  # L*R^2 or L*Delta

    notes = ""
    if p.K < 1000:
        notes = "K < 10^3: asymptotic optimal-lambda formulas may be unreliable"

    if lam > 4.0 * u:
        nb = p1 * sig ** a / lam ** (a - 1.0) + p2 * sig ** (2 * a) / lam ** (2 * a)
        opt = sig * (p.K / math.log(p.K / p.beta)) ** (1.0 / a)
        return RegimeReport(1, "lambda > 4u (zeta = 0)", zeta, nb, _RATE_FAST, opt, notes)

    if lam > 4.0 * u / 3.0:
        if sig >= lam:  # zeta < lambda <= sigma
            nb = p1 * sig ** a / lam ** (a - 1.0) + p2 * sig ** (2 * a) / lam ** (2 * a)
            return RegimeReport(2, "4u/3 < lambda <= 4u, zeta < lambda < sigma",
                                zeta, nb, _RATE_NEIGHBORHOOD, 4.0 * u, notes)
        if sig > zeta:  # zeta < sigma < lambda
            nb = p1 * zeta + p2 * zeta ** 2 / lam ** 2
            return RegimeReport(3, "4u/3 < lambda <= 4u, zeta < sigma < lambda",
                                zeta, nb, _RATE_NEIGHBORHOOD, 4.0 * u - eta, notes)
        # sigma <= zeta < lambda
        nb = p1 * zeta + p2 * zeta ** 2 / lam ** 2
        return RegimeReport(4, "4u/3 < lambda <= 4u, sigma < zeta < lambda",
                            zeta, nb, _RATE_NEIGHBORHOOD, 4.0 * u - 2.0 * sig, notes)

    # lambda <= 4u/3, hence lambda <= zeta
    if sig >= zeta:  # lambda < zeta <= sigma
        nb = (p1 * sig ** a * zeta / lam ** a
              + p2 * sig ** (2 * a) * zeta ** 2 / lam ** (2 * a + 2.0))
        return RegimeReport(5, "lambda <= 4u/3, lambda < zeta < sigma",
                            zeta, nb, _RATE_NEIGHBORHOOD, 4.0 * u / 3.0, notes)
    if sig > lam:  # lambda < sigma < zeta
        nb = (p1 * zeta ** (a + 1.0) / lam ** a
              + p2 * zeta ** (2 * a) / lam ** (2 * a + 2.0))
        return RegimeReport(6, "lambda <= 4u/3, lambda < sigma < zeta",
                            zeta, nb, _RATE_NEIGHBORHOOD, 4.0 * u / 3.0 - eta, notes)
    # sigma <= lambda < zeta
    nb = (p1 * sig * zeta ** (a - 1.0) / lam ** (a - 1.0)
          + p2 * sig ** 2 * zeta ** (2 * a - 2.0) / lam ** (2 * a))
    return RegimeReport(7, "lambda <= 4u/3, sigma < lambda < zeta",
                        zeta, nb, _RATE_NEIGHBORHOOD, 4.0 * u / 3.0, notes)


def optimal_lambda_dp(params: TheoryParams, target: PrivacyTarget, branch: str) -> float:
    """Privacy-aware optimal clipping level, large- or small-lambda branch."""
    p = params
    if branch not in ("large", "small"):
        raise InvalidTargetError("branch must be 'large' or 'small'")
    u = p.grad_scale
    w = (p.d * math.log(target.K / target.delta) * math.log(1.0 / target.delta)
         * math.log(target.K / p.beta))
    if branch == "large":
        return max(4.0 * u, (target.epsilon * p.sigma ** p.alpha / w) ** (1.0 / p.alpha))
    return min(4.0 * u / 3.0,
               2.0 * target.epsilon * u / (w ** (1.0 / (2.0 * p.alpha + 2.0)) + 1.0))


def theory_bound(params: TheoryParams, gamma: float) -> float:
    """High-probability bound on the best-iterate statistic after K updates.

    Convex: bound on min_t f(x^t) - f*. Non-convex: bound on
    min_t ||grad f(x^t)||^2.
    """
    if gamma <= 0.0:
        raise InvalidTargetError("gamma must be positive")
    p = params
    Kp1 = p.K + 1
    if p.convex:
        R = p.radius
        return (4.0 * R ** 2 / (gamma * Kp1)
                + 64.0 * p.L * R ** 4 / (p.lam ** 2 * gamma ** 2 * Kp1 ** 2))
    D = p.radius
    return (8.0 * D / (gamma * Kp1)
            + 128.0 * D ** 2 / (p.lam ** 2 * gamma ** 2 * Kp1 ** 2))
