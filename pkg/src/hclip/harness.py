"""Multi-trial high-probability experiments.

Runs T independent trials of the clipped iteration (trial i on stream_id i),
summarizes the trajectory statistics by one-sided empirical quantiles, checks
them against the closed-form bound, sweeps K for an empirical rate exponent,
and persists results as CSV or JSON.

Quantile convention: the (1-beta)-quantile of T values is the
ceil((1-beta)*T)-th smallest, with no interpolation. This sits on the
conservative side of the "with probability at least 1-beta" claim being
tested. With T = 200 and beta = 0.1 the 0.9-quantile is the 180th order
statistic; a binomial count at level 0.9 has standard deviation
sqrt(200*0.9*0.1) ~ 4.2 trials, so the estimate is stable to roughly +-2
order-statistic positions.

Diverged trials are recorded, not raised, and enter every quantile as +inf.
If more than half the trials diverge the experiment aborts.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import optimizer, schedule
from .config import SCHEMA_VERSION, ExperimentConfig, build_noise, build_problem
from .errors import DivergedError, HclipError, InvalidTargetError
from .numkit import vector
from .privacy import calibrate_sigma_omega
from .schedule import TheoryParams

__all__ = [
    "TrialResult",
    "QuantileSummary",
    "RateFit",
    "resolve_run",
    "run_trials",
    "quantile",
    "check_bound",
    "rate_fit",
    "persist",
    "load_results",
    "loglog_fit",
    "RESULT_COLUMNS",
]

RESULT_COLUMNS = ("trial", "K", "lambda", "gamma", "sigma_omega", "best_subopt",
                  "best_gradsq", "max_dist", "diverged", "wall_time")


@dataclass(frozen=True)
class TrialResult:
    """Scalar outcome of one trial, in persistence column order."""

    trial: int
    K: int
    lam: float
    gamma: float
    sigma_omega: float
    best_subopt: float
    best_gradsq: float
    max_dist: float
    diverged: bool
    wall_time: float

    def as_row(self) -> dict:
        return {
            "trial": self.trial, "K": self.K, "lambda": self.lam,
            "gamma": self.gamma, "sigma_omega": self.sigma_omega,
            "best_subopt": self.best_subopt, "best_gradsq": self.best_gradsq,
            "max_dist": self.max_dist, "diverged": self.diverged,
            "wall_time": self.wall_time,
        }


@dataclass(frozen=True)
class QuantileSummary:
    statistic_name: str
    values: tuple              # sorted ascending, length T
    level: float
    quantile_value: float
    bound: float
    passed: bool
    containment_fraction: Optional[float] = None   # convex runs only
    containment_radius: Optional[float] = None


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    raw_slope: float
    raw_intercept: float
    raw_r2: float
    floor: float
    K_values: tuple
    quantiles: tuple
    diagnostic: str = ""


def resolve_run(config: ExperimentConfig, K: Optional[int] = None,
                lam: Optional[float] = None):
    """Resolve the effective (theory, gamma, sigma_omega) for an experiment.

    gamma comes from the step-size rule unless the config fixes it;
    sigma_omega comes from the privacy target when one is given.
    """
    theory = config.theory(K=K, lam=lam)
    if config.privacy is not None:
        if math.isinf(theory.lam):
            raise InvalidTargetError(
                "unclipped runs have unbounded sensitivity; drop the privacy target")
        target = config.privacy
        if target.K != theory.K:
            target = replace(target, K=theory.K)
        sigma_omega = calibrate_sigma_omega(target, theory.lam)
        theory = replace(theory, sigma_omega=sigma_omega)
    if config.gamma is not None:
        gamma = config.gamma
    elif theory.convex:
        gamma = schedule.stepsize_convex_full(theory).gamma
    else:
        gamma = schedule.stepsize_nonconvex_full(theory).gamma
    return theory, gamma, theory.sigma_omega


def _one_trial(problem, noise, x0, theory, gamma, seed, trial) -> TrialResult:
    run_config = optimizer.RunConfig(
        problem=problem, noise=noise, lam=theory.lam, gamma=gamma, K=theory.K,
        sigma_omega=theory.sigma_omega, seed=seed, stream_id=trial)
    t0 = time.perf_counter()
    try:
        rec = optimizer.run(run_config, x0)
    except DivergedError:
        return TrialResult(
            trial=trial, K=theory.K, lam=theory.lam, gamma=gamma,
            sigma_omega=theory.sigma_omega, best_subopt=math.inf,
            best_gradsq=math.inf, max_dist=math.inf, diverged=True,
            wall_time=time.perf_counter() - t0)
    return TrialResult(
        trial=trial, K=theory.K, lam=theory.lam, gamma=gamma,
        sigma_omega=theory.sigma_omega, best_subopt=rec.best_suboptimality,
        best_gradsq=rec.best_grad_norm_sq, max_dist=rec.max_dist_to_opt,
        diverged=False, wall_time=rec.wall_time)


def _worker(args) -> TrialResult:
    # runs in a separate process; rebuild the problem from its description
    raw, K, lam, gamma, sigma_omega, trial = args
    config = ExperimentConfig(**raw)
    theory = config.theory(K=K, lam=lam)
    theory = replace(theory, sigma_omega=sigma_omega)
    problem = build_problem(config.problem)
    noise = build_noise(config.noise, problem.d)
    return _one_trial(problem, noise, vector(config.x0), theory, gamma,
                      config.seed, trial)


def run_trials(config: ExperimentConfig, K: Optional[int] = None,
               lam: Optional[float] = None):
    """Run config.trials independent trials; trial i uses stream_id = i.

    Returns (results, theory, gamma) with results ordered by trial index.
    Aborts with an error if more than half the trials diverge.
    """
    theory, gamma, _ = resolve_run(config, K=K, lam=lam)
    T = config.trials
    if config.workers > 1:
        raw = {
            "problem": config.problem, "noise": config.noise,
            "x0": list(config.x0), "theory_overrides": config.theory_overrides,
            "trials": config.trials, "seed": config.seed, "gamma": config.gamma,
        }
        jobs = [(raw, theory.K, theory.lam, gamma, theory.sigma_omega, i)
                for i in range(T)]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        problem = build_problem(config.problem)
        noise = build_noise(config.noise, problem.d)
        x0 = vector(config.x0)
        results = [_one_trial(problem, noise, x0, theory, gamma, config.seed, i)
                   for i in range(T)]
    failures = sum(r.diverged for r in results)
    if 2 * failures > T:
        raise HclipError(
            f"experiment aborted: {failures} of {T} trials diverged")
    return results, theory, gamma


def quantile(values, level: float) -> float:
    """ceil(level*n)-th smallest of values; order statistic, no interpolation."""
    vals = np.sort(np.asarray(values, dtype=np.float64))
    n = vals.size
    if n == 0:
        raise HclipError("quantile of empty values")
    if not 0.0 < level < 1.0:
        raise HclipError("quantile level must lie in (0, 1)")
    return float(vals[min(math.ceil(level * n), n) - 1])


def check_bound(results, theory: TheoryParams, gamma: float) -> QuantileSummary:
    """Compare the empirical (1-beta)-quantile with the closed-form bound.

    The statistic is best_subopt for convex runs and best_gradsq otherwise.
    Convex summaries also report the fraction of trials whose iterates all
    stayed within sqrt(2)*R of the optimum.
    """
    results = list(results)
    if not results:
        raise HclipError("no trial results to summarize")
    for r in results:
        if (r.K != theory.K or r.lam != theory.lam or r.gamma != gamma
                or r.sigma_omega != theory.sigma_omega):
            raise HclipError(
                f"trial {r.trial} was run with different parameters than the "
                "summary requests; refusing a mixed-config summary")
    name = "best_subopt" if theory.convex else "best_gradsq"
    values = [getattr(r, name) if not r.diverged else math.inf for r in results]
    level = 1.0 - theory.beta
    q = quantile(values, level)
    bound = schedule.theory_bound(theory, gamma)
    containment = radius = None
    if theory.convex:
        radius = math.sqrt(2.0) * theory.radius
        inside = [(not r.diverged) and r.max_dist <= radius for r in results]
        containment = sum(inside) / len(results)
    return QuantileSummary(
        statistic_name=name, values=tuple(sorted(values)), level=level,
        quantile_value=q, bound=bound, passed=bool(q <= bound),
        containment_fraction=containment, containment_radius=radius)


def loglog_fit(ks, ys):
    lx = np.log(np.asarray(ks, dtype=np.float64))
    ly = np.log(np.asarray(ys, dtype=np.float64))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), float(intercept), r2


def rate_fit(config: ExperimentConfig) -> RateFit:
    """Empirical rate exponent across config.K_grid at fixed lambda.

    For each K the (1-beta)-quantile of the trajectory statistic is computed
    over config.trials trials. The floored slope fits
    log(quantile - floor) against log K, where the floor is the empirical
    large-K plateau: the mean of the statistic over the trials at the
    largest K. A raw log-log slope without floor subtraction is reported
    alongside. Nonpositive differences after floor subtraction make the
    floored fit NaN, with a diagnostic naming the offending K values.
    """
    grid = config.K_grid
    if grid is None or len(grid) < 4:
        raise HclipError("rate_fit needs a K_grid with at least 4 points")
    if grid[-1] < 100 * grid[0]:
        raise HclipError("rate_fit needs a K_grid spanning at least 2 decades")

    quantiles = []
    floor = math.nan
    theory0 = None
    for K in grid:
        results, theory, gamma = run_trials(config, K=int(K))
        if theory0 is None:
            theory0 = theory
        name = "best_subopt" if theory.convex else "best_gradsq"
        values = [getattr(r, name) if not r.diverged else math.inf
                  for r in results]
        quantiles.append(quantile(values, 1.0 - theory.beta))
        if K == grid[-1]:
            floor = float(np.mean(values))

    raw_slope, raw_intercept, raw_r2 = loglog_fit(grid, quantiles)
    diffs = [q - floor for q in quantiles]
    bad = [int(k) for k, dq in zip(grid, diffs) if not dq > 0.0]
    if bad:
        return RateFit(
            slope=math.nan, intercept=math.nan, r2=math.nan,
            raw_slope=raw_slope, raw_intercept=raw_intercept, raw_r2=raw_r2,
            floor=floor, K_values=tuple(int(k) for k in grid),
            quantiles=tuple(quantiles),
            diagnostic=("floor subtraction left nonpositive differences at "
                        f"K in {bad}; floored slope undefined"))
    slope, intercept, r2 = loglog_fit(grid, diffs)
    return RateFit(
        slope=slope, intercept=intercept, r2=r2, raw_slope=raw_slope,
        raw_intercept=raw_intercept, raw_r2=raw_r2, floor=floor,
        K_values=tuple(int(k) for k in grid), quantiles=tuple(quantiles))


def persist(results, path, format: str = "csv",
            config: Optional[ExperimentConfig] = None) -> None:
    """Write trial results as CSV (stable column order) or schema-tagged JSON."""
    results = list(results)
    try:
        if format == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
                w.writeheader()
                for r in results:
                    row = r.as_row()
                    w.writerow({c: repr(row[c]) if isinstance(row[c], float)
                                else row[c] for c in RESULT_COLUMNS})
        elif format == "json":
            doc = {"schema": SCHEMA_VERSION,
                   "config": config.to_dict() if config is not None else None,
                   "records": [r.as_row() for r in results]}
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=2)
                fh.write("\n")
        else:
            raise HclipError(f"unknown output format {format!r}")
    except OSError as err:
        raise HclipError(f"cannot write results to {path}: {err}") from err


def _result_from_row(row: dict) -> TrialResult:
    diverged = row["diverged"]
    if isinstance(diverged, str):
        diverged = diverged.strip().lower() in ("true", "1")
    return TrialResult(
        trial=int(row["trial"]), K=int(row["K"]), lam=float(row["lambda"]),
        gamma=float(row["gamma"]), sigma_omega=float(row["sigma_omega"]),
        best_subopt=float(row["best_subopt"]),
        best_gradsq=float(row["best_gradsq"]),
        max_dist=float(row["max_dist"]), diverged=bool(diverged),
        wall_time=float(row["wall_time"]))


def load_results(path) -> list:
    """Read results written by persist; format detected from the content."""
    try:
        with open(path) as fh:
            head = fh.read(1)
            fh.seek(0)
            if head == "{":
                doc = json.load(fh)
                if doc.get("schema") != SCHEMA_VERSION:
                    raise HclipError(
                        f"{path}: unsupported schema {doc.get('schema')!r}")
                return [_result_from_row(r) for r in doc["records"]]
            return [_result_from_row(r) for r in csv.DictReader(fh)]
    except OSError as err:
        raise HclipError(f"cannot read results from {path}: {err}") from err
