"""The clipped, noise-injected SGD iteration with trajectory statistics.

One run performs K updates x^{k+1} = x^k - gamma * (clip(g_k, lambda) + w_k)
and reports minima of the experimenter-side statistics over the K+1 points
x^0..x^K (the starting point counts). Statistics use the true objective and
gradient, not the stochastic samples.

Randomness layout per run, on a single stream keyed by (seed, stream_id):
first the K oracle noise draws in bulk, then the K injected Gaussian vectors
in bulk. Reference implementations that replay the same stream in this order
reproduce the trajectory.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numkit, schedule
from .clipping import clip_factor_c
from .errors import DivergedError, InvalidDimensionError, InvalidTargetError
from .numkit import RngStream
from .oracles import NoiseModel, ProblemSpec
from .privacy import PrivacyTarget, calibrate_sigma_omega
from .schedule import TheoryParams

__all__ = ["RunConfig", "RunRecord", "run", "run_with_theory"]

_DIVERGENCE_RADIUS = 1e12
_RECORD_MODES = ("none", "scalars", "full")


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    noise: NoiseModel
    lam: float          # clipping level; inf = unclipped sentinel
    gamma: float
    K: int
    sigma_omega: float = 0.0
    seed: int = 0
    stream_id: int = 0
    record: str = "none"

    def __post_init__(self):
        if self.gamma <= 0.0 or self.lam <= 0.0 or self.K < 1:
            raise InvalidTargetError("gamma > 0, lambda > 0 and K >= 1 required")
        if self.sigma_omega < 0.0:
            raise InvalidTargetError("sigma_omega must be nonnegative")
        if self.record not in _RECORD_MODES:
            raise InvalidTargetError(f"record must be one of {_RECORD_MODES}")


@dataclass(frozen=True)
class RunRecord:
    best_suboptimality: float
    best_grad_norm_sq: float
    max_dist_to_opt: float      # nan when x* unknown or problem non-convex
    final_x: np.ndarray
    wall_time: float
    per_step: Optional[dict] = None


def run(config: RunConfig, x0: np.ndarray) -> RunRecord:
    """Execute K updates from x0; deterministic given (seed, stream_id)."""
    prob = config.problem
    if x0.shape != (prob.d,):
        raise InvalidDimensionError(
            f"x0 has shape {x0.shape}, problem dimension is {prob.d}")
    t0 = time.perf_counter()
    K, lam, gamma, sw = config.K, config.lam, config.gamma, config.sigma_omega
    rng = RngStream(config.seed, config.stream_id)

    noise = config.noise.sample_matrix(rng, K)
    rng.gaussian_vector_calls += K
    dp = sw * numkit.standard_normals(rng, (K, prob.d)) if sw > 0.0 else None

    track_dist = prob.convex and prob.x_star is not None
    full = config.record == "full"
    recording = config.record in ("scalars", "full")
    if recording:
        f_hist = np.empty(K + 1)
        g_hist = np.empty(K + 1)
        clip_hist = np.zeros(K + 1, dtype=bool)
        theta_hist = np.empty(K + 1) if full else None

    x = x0.astype(np.float64).copy()
    best_f = math.inf
    best_g2 = math.inf
    max_dist = 0.0
    xs = prob.x_star
    f_star = prob.f_star

    for k in range(K + 1):
        fval, g = prob.eval_both(x)
        if not math.isfinite(fval):
            raise DivergedError(k)
        g2 = float(np.dot(g, g))
        if fval < best_f:
            best_f = fval
        if g2 < best_g2:
            best_g2 = g2
        if track_dist:
            dxs = x - xs
            dist2 = float(np.dot(dxs, dxs))
            if dist2 > max_dist:
                max_dist = dist2
        if recording:
            f_hist[k] = fval
            g_hist[k] = math.sqrt(g2)
        if k == K:
            break

        ghat = g + noise[k]
        n2 = float(np.dot(ghat, ghat))
        clipped = n2 > lam * lam
        if clipped:
            ghat = ghat * (lam / math.sqrt(n2))
        if recording:
            clip_hist[k] = clipped
            if full:
                th = ghat - clip_factor_c(math.sqrt(g2), lam) * g
                theta_hist[k] = float(np.sqrt(np.dot(th, th)))
        if dp is None:
            x = x - gamma * ghat
        else:
            x = x - gamma * (ghat + dp[k])
        xn2 = float(np.dot(x, x))
        if not math.isfinite(xn2) or xn2 > _DIVERGENCE_RADIUS ** 2:
            raise DivergedError(k + 1)

    per_step = None
    if recording:
        per_step = {"f": f_hist, "grad_norm": g_hist, "clip_active": clip_hist}
        if full:
            theta_hist[K] = math.nan
            per_step["theta_norm"] = theta_hist

    return RunRecord(
        best_suboptimality=best_f - f_star,
        best_grad_norm_sq=best_g2,
        max_dist_to_opt=math.sqrt(max_dist) if track_dist else math.nan,
        final_x=x,
        wall_time=time.perf_counter() - t0,
        per_step=per_step,
    )


def run_with_theory(
    params: TheoryParams,
    problem: ProblemSpec,
    noise: NoiseModel,
    seed: int,
    x0: np.ndarray,
    target: Optional[PrivacyTarget] = None,
    stream_id: int = 0,
    record: str = "none",
):
    """Pick gamma and sigma_omega from the theory, run, and return the bound.

    Returns (record, gamma_used, bound). sigma_omega comes from the privacy
    target when one is given, else from params.
    """
    if abs(params.L - problem.L) > 1e-9 * max(1.0, problem.L):
        raise InvalidTargetError(
            f"params.L={params.L} disagrees with problem.L={problem.L}")
    if params.convex != problem.convex:
        raise InvalidTargetError("params/problem convexity flags disagree")
    if target is not None:
        if math.isinf(params.lam):
            raise InvalidTargetError(
                "unclipped runs have unbounded sensitivity; no privacy target allowed")
        sigma_omega = calibrate_sigma_omega(target, params.lam)
    else:
        sigma_omega = params.sigma_omega
    theory = TheoryParams(
        L=params.L, radius=params.radius, sigma=params.sigma, alpha=params.alpha,
        K=params.K, beta=params.beta, lam=params.lam, sigma_omega=sigma_omega,
        d=params.d, convex=params.convex,
    )
    if theory.convex:
        gamma = schedule.stepsize_convex_full(theory).gamma
    else:
        gamma = schedule.stepsize_nonconvex_full(theory).gamma
    config = RunConfig(problem=problem, noise=noise, lam=theory.lam, gamma=gamma,
                       K=theory.K, sigma_omega=sigma_omega, seed=seed,
                       stream_id=stream_id, record=record)
    rec = run(config, x0)
    return rec, gamma, schedule.theory_bound(theory, gamma)
