"""Test problems and heavy-tailed stochastic gradient oracles.

Problems come with an exact smoothness constant L and known infimum so the
convergence bounds can be evaluated without estimation. Noise families are
radial (heavy-tailed radius times a uniform direction on the sphere), which
makes the alpha-th moment of the noise norm available in closed form or by
one-dimensional quadrature, and therefore certifiable at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special, stats

from . import numkit
from .errors import InvalidDimensionError, InvalidProblemError, MomentUnboundedError
from .numkit import RngStream

__all__ = [
    "ProblemSpec",
    "NoiseModel",
    "StochasticOracle",
    "make_quadratic",
    "make_nonconvex_smooth",
    "make_logistic",
    "make_pareto_noise",
    "make_student_t_noise",
    "make_gaussian_noise",
    "make_two_point_noise",
    "sample_gradient",
]


@dataclass(frozen=True)
class ProblemSpec:
    """Objective with gradient oracle and certified constants.

    ``value_and_grad`` is an optional fused evaluation used by the optimizer
    hot loop; it must agree with ``objective`` and ``gradient`` exactly.
    """

    d: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    L: float
    f_star: float
    convex: bool
    x_star: Optional[np.ndarray] = None
    value_and_grad: Optional[Callable[[np.ndarray], tuple]] = None

    def eval_both(self, x: np.ndarray) -> tuple:
        if self.value_and_grad is not None:
            return self.value_and_grad(x)
        return self.objective(x), self.gradient(x)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean perturbation with certified E||xi||^alpha <= sigma_alpha."""

    kind: str
    alpha: float
    sigma_alpha: float
    d: int
    parameters: dict = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        """The certified sigma, i.e. sigma_alpha ** (1/alpha)."""
        return self.sigma_alpha ** (1.0 / self.alpha)

    def sample_matrix(self, rng: RngStream, n: int) -> np.ndarray:
        """n independent draws, shape (n, d); consumes n noise draws."""
        rng.noise_draws += n
        d = self.d
        if self.kind == "pareto":
            scale = self.parameters["scale"]
            if scale == 0.0:
                return np.zeros((n, d))
            p = self.parameters["tail_p"]
            r = scale * rng.uniform(n) ** (-1.0 / p)
            return _radial(rng, n, d, r)
        if self.kind == "student-t":
            scale = self.parameters["scale"]
            if scale == 0.0:
                return np.zeros((n, d))
            nu = self.parameters["nu"]
            r = scale * np.abs(stats.t.ppf(0.5 + 0.5 * _open_unit(rng.uniform(n)), df=nu))
            return _radial(rng, n, d, r)
        if self.kind == "gaussian":
            s = self.parameters["scale"]
            if s == 0.0:
                return np.zeros((n, d))
            return s * numkit.standard_normals(rng, (n, d))
        if self.kind == "two-point":
            m = self.parameters["magnitude"]
            out = np.zeros((n, d))
            out[:, 0] = np.where(rng.uniform(n) <= 0.5, m, -m)
            return out
        raise InvalidProblemError(f"unknown noise kind {self.kind!r}")

    def sample(self, rng: RngStream) -> np.ndarray:
        return self.sample_matrix(rng, 1)[0]


@dataclass(frozen=True)
class StochasticOracle:
    """Unbiased gradient oracle: returns grad f(x) plus one noise draw."""

    problem: ProblemSpec
    noise: NoiseModel


def _open_unit(u: np.ndarray) -> np.ndarray:
    return np.minimum(u, 1.0 - 2.0 ** -53)


def _radial(rng: RngStream, n: int, d: int, r: np.ndarray) -> np.ndarray:
    """Radius r times a uniformly distributed unit direction."""
    z = numkit.standard_normals(rng, (n, d))
    zn = np.sqrt(np.einsum("ij,ij->i", z, z))
    zn[zn == 0.0] = 1.0
    return z * (r / zn)[:, None]


def make_quadratic(d: int, eigenvalues, x_star) -> ProblemSpec:
    """Convex diagonal quadratic f(x) = 1/2 sum a_i (x_i - x*_i)^2."""
    a = np.asarray(eigenvalues, dtype=np.float64)
    xs = numkit.vector(x_star)
    if a.shape != (d,) or xs.shape != (d,):
        raise InvalidProblemError("eigenvalues and x_star must have length d")
    if np.any(a <= 0.0):
        raise InvalidProblemError("eigenvalues must be positive")

    def f(x):
        dx = x - xs
        return 0.5 * float(np.dot(a * dx, dx))

    def grad(x):
        return a * (x - xs)

    def both(x):
        dx = x - xs
        g = a * dx
        return 0.5 * float(np.dot(g, dx)), g

    return ProblemSpec(
        d=d, objective=f, gradient=grad, L=float(np.max(a)), f_star=0.0,
        convex=True, x_star=xs, value_and_grad=both,
    )


def make_nonconvex_smooth(d: int, scale: float) -> ProblemSpec:
    """Bounded non-convex problem f(x) = scale * sum x_i^2 / (1 + x_i^2).

    The 1-D curvature x -> (2 - 6x^2)/(1 + x^2)^3 peaks at 2, and the Hessian
    is diagonal, so L = 2 * scale holds globally.
    """
    if d < 1:
        raise InvalidDimensionError("dimension must be >= 1")
    if scale <= 0.0:
        raise InvalidProblemError("scale must be positive")

    def f(x):
        x2 = x * x
        return scale * float(np.sum(x2 / (1.0 + x2)))

    def grad(x):
        return scale * 2.0 * x / (1.0 + x * x) ** 2

    def both(x):
        x2 = x * x
        opx = 1.0 + x2
        return scale * float(np.sum(x2 / opx)), scale * 2.0 * x / (opx * opx)

    return ProblemSpec(
        d=d, objective=f, gradient=grad, L=2.0 * scale, f_star=0.0,
        convex=False, x_star=np.zeros(d), value_and_grad=both,
    )


def make_logistic(d: int, n: int, seed: int = 0) -> ProblemSpec:
    """Synthetic finite-sum logistic regression (Gaussian features).

    Intended for the finite-sum DP path only; f_star and x_star come from a
    high-accuracy deterministic solve at construction.
    """
    if d < 1 or d > 50:
        raise InvalidProblemError("logistic problem supports 1 <= d <= 50")
    if n < 1 or n > 10_000:
        raise InvalidProblemError("logistic problem supports 1 <= n <= 10^4")
    rng = RngStream(seed, stream_id=0)
    A = numkit.standard_normals(rng, (n, d))
    w_true = numkit.standard_normals(rng, d)
    margins = A @ w_true
    y = np.where(_open_unit(rng.uniform(n)) < 1.0 / (1.0 + np.exp(-margins)), 1.0, -1.0)

    def f(x):
        z = -y * (A @ x)
        return float(np.mean(np.logaddexp(0.0, z)))

    def grad(x):
        z = -y * (A @ x)
        s = 1.0 / (1.0 + np.exp(-z))
        return -(A.T @ (y * s)) / n

    # logistic curvature is at most 1/4 per sample
    L = float(np.linalg.eigvalsh(A.T @ A / n).max()) / 4.0
    res = optimize.minimize(f, np.zeros(d), jac=grad, method="L-BFGS-B",
                            options={"gtol": 1e-12, "maxiter": 5000})
    return ProblemSpec(
        d=d, objective=f, gradient=grad, L=L, f_star=float(res.fun),
        convex=True, x_star=res.x.copy(),
    )


def make_pareto_noise(alpha: float, tail_p: float, scale: float, d: int) -> NoiseModel:
    """Radial Pareto noise: radius scale * U^(-1/tail_p), uniform direction.

    E[r^alpha] = scale^alpha * tail_p / (tail_p - alpha), which certifies
    sigma_alpha exactly. With tail_p <= 2 the variance is infinite.
    """
    if not (1.0 < alpha <= 2.0):
        raise InvalidProblemError("alpha must lie in (1, 2]")
    if tail_p <= alpha:
        raise MomentUnboundedError("tail_p must exceed alpha for a finite alpha-th moment")
    if scale < 0.0:
        raise InvalidProblemError("scale must be nonnegative")
    if d < 1:
        raise InvalidDimensionError("dimension must be >= 1")
    sigma_alpha = scale ** alpha * tail_p / (tail_p - alpha)
    return NoiseModel(kind="pareto", alpha=alpha, sigma_alpha=sigma_alpha, d=d,
                      parameters={"tail_p": tail_p, "scale": scale})


def make_student_t_noise(alpha: float, nu: float, scale: float, d: int) -> NoiseModel:
    """Radial Student-t noise: radius scale * |T_nu|, uniform direction.

    sigma_alpha = scale^alpha * E|T_nu|^alpha comes from numerical quadrature
    at construction (finite only for nu > alpha).
    """
    if not (1.0 < alpha <= 2.0):
        raise InvalidProblemError("alpha must lie in (1, 2]")
    if nu <= alpha:
        raise MomentUnboundedError("nu must exceed alpha for a finite alpha-th moment")
    if scale < 0.0:
        raise InvalidProblemError("scale must be nonnegative")
    if d < 1:
        raise InvalidDimensionError("dimension must be >= 1")
    moment, _ = integrate.quad(lambda t: 2.0 * t ** alpha * stats.t.pdf(t, df=nu),
                               0.0, np.inf, limit=200)
    return NoiseModel(kind="student-t", alpha=alpha, sigma_alpha=scale ** alpha * moment,
                      d=d, parameters={"nu": nu, "scale": scale})


def make_gaussian_noise(alpha: float, scale: float, d: int) -> NoiseModel:
    """Per-coordinate N(0, scale^2) noise; ||xi|| is scale times a chi_d."""
    if not (1.0 < alpha <= 2.0):
        raise InvalidProblemError("alpha must lie in (1, 2]")
    if scale < 0.0:
        raise InvalidProblemError("scale must be nonnegative")
    if d < 1:
        raise InvalidDimensionError("dimension must be >= 1")
    # E[chi_d^alpha] = 2^(alpha/2) Gamma((d+alpha)/2) / Gamma(d/2)
    chi_moment = 2.0 ** (alpha / 2.0) * special.gamma((d + alpha) / 2.0) / special.gamma(d / 2.0)
    sigma_alpha = scale ** alpha * chi_moment if scale > 0 else 0.0
    return NoiseModel(kind="gaussian", alpha=alpha, sigma_alpha=sigma_alpha, d=d,
                      parameters={"scale": scale})


def make_two_point_noise(alpha: float, magnitude: float, d: int) -> NoiseModel:
    """Symmetric two-point noise +-m along the first axis; E||xi||^alpha = m^alpha.

    Used to probe sharpness of the clipped-moment bounds with exact support.
    """
    if not (1.0 < alpha <= 2.0):
        raise InvalidProblemError("alpha must lie in (1, 2]")
    if magnitude < 0.0:
        raise InvalidProblemError("magnitude must be nonnegative")
    if d < 1:
        raise InvalidDimensionError("dimension must be >= 1")
    return NoiseModel(kind="two-point", alpha=alpha, sigma_alpha=magnitude ** alpha,
                      d=d, parameters={"magnitude": magnitude})


def sample_gradient(oracle: StochasticOracle, x: np.ndarray, rng: RngStream) -> np.ndarray:
    """grad f(x) plus one fresh noise draw."""
    if x.shape != (oracle.problem.d,):
        raise InvalidDimensionError(
            f"point has shape {x.shape}, problem dimension is {oracle.problem.d}")
    return oracle.problem.gradient(x) + oracle.noise.sample(rng)
