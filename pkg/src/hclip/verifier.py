"""Monte Carlo check of the clipped-estimator bias and variance bounds.

For a random vector X with mean x and E||X - x||^alpha <= sigma^alpha, the
clipped estimator clip(X, lambda) has bias (relative to the half-level clip
of the mean, clip(x, lambda/2)) and variance bounded by closed-form
expressions in (alpha, sigma, ||x||, lambda). This module evaluates both
bounds exactly and estimates the left-hand sides by simulation, with block
bootstrap confidence bands: clipped samples are bounded, so the bootstrap is
valid even when the raw noise has infinite variance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .clipping import clip
from .errors import HclipError, InvalidDimensionError
from .numkit import RngStream, norm, vector
from .oracles import NoiseModel, make_pareto_noise

__all__ = [
    "LemmaScenario",
    "lemma_bias_bound",
    "lemma_variance_bound",
    "estimate_clipped_moments",
    "sweep_lemma",
    "default_grid",
    "write_sweep_csv",
    "SWEEP_COLUMNS",
]

N_BOOTSTRAP = 500
N_BLOCKS = 500
BAND_LEVEL = 0.99


@dataclass
class LemmaScenario:
    d: int
    x: np.ndarray              # true mean
    noise: NoiseModel
    lam: float
    n_samples: int
    rng: RngStream

    def __post_init__(self):
        self.x = vector(self.x)
        if self.x.shape != (self.d,) or self.noise.d != self.d:
            raise InvalidDimensionError("x and noise must match the scenario dimension")
        if self.lam <= 0.0 or self.n_samples < 1:
            raise HclipError("lambda must be positive and n_samples >= 1")


def lemma_bias_bound(scenario: LemmaScenario) -> float:
    """Upper bound on || E[clip(X, lam)] - clip(x, lam/2) ||."""
    a = scenario.noise.alpha
    sig = scenario.noise.sigma
    lam = scenario.lam
    xn = norm(scenario.x)
    excess = max(0.0, xn - lam / 2.0)
    pow2 = 2.0 ** (2.0 * a - 1.0)
    s = sig ** a + excess ** a
    return (pow2 * sig * s ** ((a - 1.0) / a) / lam ** (a - 1.0)
            + max(xn, lam / 2.0) * pow2 * s / lam ** a
            + excess)


def lemma_variance_bound(scenario: LemmaScenario) -> float:
    """Upper bound on E || clip(X, lam) - E clip(X, lam) ||^2."""
    a = scenario.noise.alpha
    lam = scenario.lam
    xn = norm(scenario.x)
    excess = max(0.0, xn - lam / 2.0)
    coef = 9.0 * (2.0 ** (2.0 * a - 1.0) + 1.0) / 4.0
    return coef * lam ** (2.0 - a) * (scenario.noise.sigma_alpha + excess ** a)


def estimate_clipped_moments(scenario: LemmaScenario):
    """Empirical bias norm and variance of the clipped samples, with bands.

    Returns (bias_norm, variance, (band_bias, band_var)) where the bands are
    99% bootstrap half-widths over N_BOOTSTRAP resamples of sample blocks.
    """
    n, d, lam = scenario.n_samples, scenario.d, scenario.lam
    xs = scenario.x + scenario.noise.sample_matrix(scenario.rng, n)
    norms = np.sqrt(np.einsum("ij,ij->i", xs, xs))
    scale = np.minimum(1.0, lam / np.maximum(norms, np.finfo(float).tiny))
    clipped = xs * scale[:, None]

    x_hat = clip(scenario.x, lam / 2.0)
    mean = clipped.mean(axis=0)
    bias_norm = norm(mean - x_hat)
    second = float(np.einsum("ij,ij->", clipped, clipped)) / n
    variance = second - float(np.dot(mean, mean))

    n_blocks = min(N_BLOCKS, n)
    usable = (n // n_blocks) * n_blocks
    blocks = clipped[:usable].reshape(n_blocks, -1, d)
    block_mean = blocks.mean(axis=1)                              # (B, d)
    block_m2 = np.einsum("bij,bij->b", blocks, blocks) / blocks.shape[1]

    boot = scenario.rng
    idx = (boot.uniform((N_BOOTSTRAP, n_blocks)) * n_blocks).astype(np.intp)
    idx[idx == n_blocks] = n_blocks - 1
    mu_b = block_mean[idx].mean(axis=1)                           # (B*, d)
    m2_b = block_m2[idx].mean(axis=1)
    bias_b = np.sqrt(np.einsum("ij,ij->i", mu_b - x_hat, mu_b - x_hat))
    var_b = m2_b - np.einsum("ij,ij->i", mu_b, mu_b)

    lo, hi = 50.0 * (1.0 - BAND_LEVEL), 100.0 - 50.0 * (1.0 - BAND_LEVEL)
    band_bias = float(np.percentile(bias_b, hi) - np.percentile(bias_b, lo)) / 2.0
    band_var = float(np.percentile(var_b, hi) - np.percentile(var_b, lo)) / 2.0
    return bias_norm, variance, (band_bias, band_var)


SWEEP_COLUMNS = ("alpha", "lambda", "x_norm", "sigma_alpha", "emp_bias",
                 "bound_bias", "emp_var", "bound_var", "band_bias", "band_var",
                 "pass")


def sweep_lemma(grid) -> list[dict]:
    """Run every scenario in the grid; pass = empirical <= bound + band."""
    grid = list(grid)
    if not grid:
        raise HclipError("empty scenario grid")
    rows = []
    for sc in grid:
        bb = lemma_bias_bound(sc)
        vb = lemma_variance_bound(sc)
        eb, ev, (band_b, band_v) = estimate_clipped_moments(sc)
        rows.append({
            "alpha": sc.noise.alpha,
            "lambda": sc.lam,
            "x_norm": norm(sc.x),
            "sigma_alpha": sc.noise.sigma_alpha,
            "emp_bias": eb,
            "bound_bias": bb,
            "emp_var": ev,
            "bound_var": vb,
            "band_bias": band_b,
            "band_var": band_v,
            "pass": bool(eb <= bb + band_b and ev <= vb + band_v),
        })
    return rows


def default_grid(n_samples: int = 1_000_000, d: int = 4, seed: int = 0):
    """75 scenarios: alpha x (lambda/sigma multiples) x (||x|| multiples)."""
    scenarios = []
    stream = 0
    for alpha in (1.2, 1.5, 2.0):
        noise = make_pareto_noise(alpha=alpha, tail_p=alpha + 1.0, scale=1.0, d=d)
        sig = noise.sigma
        for lam_mult in (0.5, 1.0, 2.0, 4.0, 8.0):
            lam = lam_mult * sig
            for x_mult in (0.0, 0.25, 0.5, 1.0, 4.0):
                x = np.zeros(d)
                x[0] = x_mult * lam
                scenarios.append(LemmaScenario(
                    d=d, x=x, noise=noise, lam=lam, n_samples=n_samples,
                    rng=RngStream(seed, stream_id=stream)))
                stream += 1
    return scenarios


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({c: row[c] for c in SWEEP_COLUMNS})
