"""Declarative experiment configuration (JSON schema "hclip-v1").

Problems and noise models are described by plain dicts so configurations can
live in JSON files, travel to worker processes, and be echoed back into
result files. Example:

    {
      "schema": "hclip-v1",
      "problem": {"kind": "quadratic", "d": 10,
                  "eigenvalues": [0.1, ...], "x_star": [0, ...]},
      "noise": {"kind": "pareto", "alpha": 1.5, "tail_p": 2.5, "scale": 1.0},
      "x0": [1.0, 0.0, ...],
      "theory": {"radius": 1.0, "sigma_omega": 0.0, "beta": 0.1,
                 "lambda": 4.0, "K": 10000},
      "privacy": {"epsilon": 10, "delta": 1e-5},       // optional
      "trials": 200, "seed": 1, "output_path": "out.csv", "format": "csv"
    }

L, alpha, d and the convexity flag are derived from the problem and noise
blocks; gamma comes from the step-size rule unless given explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import HclipError, InvalidProblemError
from .numkit import vector
from .oracles import (
    NoiseModel,
    ProblemSpec,
    make_gaussian_noise,
    make_logistic,
    make_nonconvex_smooth,
    make_pareto_noise,
    make_quadratic,
    make_student_t_noise,
    make_two_point_noise,
)
from .privacy import PrivacyTarget
from .schedule import TheoryParams

SCHEMA_VERSION = "hclip-v1"

__all__ = ["SCHEMA_VERSION", "ExperimentConfig", "build_problem", "build_noise",
           "load_config", "config_from_dict"]


def build_problem(spec: dict) -> ProblemSpec:
    kind = spec.get("kind")
    if kind == "quadratic":
        return make_quadratic(spec["d"], spec["eigenvalues"], spec["x_star"])
    if kind == "nonconvex":
        return make_nonconvex_smooth(spec["d"], spec["scale"])
    if kind == "logistic":
        return make_logistic(spec["d"], spec["n"], spec.get("seed", 0))
    raise InvalidProblemError(f"unknown problem kind {kind!r}")


def build_noise(spec: dict, d: int) -> NoiseModel:
    kind = spec.get("kind")
    if kind == "pareto":
        return make_pareto_noise(spec["alpha"], spec["tail_p"], spec["scale"], d)
    if kind == "student-t":
        return make_student_t_noise(spec["alpha"], spec["nu"], spec["scale"], d)
    if kind == "gaussian":
        return make_gaussian_noise(spec["alpha"], spec["scale"], d)
    if kind == "two-point":
        return make_two_point_noise(spec["alpha"], spec["magnitude"], d)
    raise InvalidProblemError(f"unknown noise kind {kind!r}")


@dataclass
class ExperimentConfig:
    """Full parameterization of a multi-trial experiment."""

    problem: dict
    noise: dict
    x0: list
    theory_overrides: dict          # radius, beta, lambda, K, sigma_omega, gamma?
    trials: int = 200
    privacy: Optional[PrivacyTarget] = None
    K_grid: Optional[list] = None
    lambda_grid: Optional[list] = None
    output_path: Optional[str] = None
    format: str = "csv"
    seed: int = 0
    record: str = "none"
    workers: int = 1
    gamma: Optional[float] = None   # explicit step-size; None = from rule

    def __post_init__(self):
        if self.trials < 1:
            raise HclipError("trials must be >= 1")
        if self.format not in ("csv", "json"):
            raise HclipError(f"unknown output format {self.format!r}")
        for name, grid in (("K_grid", self.K_grid), ("lambda_grid", self.lambda_grid)):
            if grid is not None:
                if any(b <= a for a, b in zip(grid, grid[1:])) or any(g <= 0 for g in grid):
                    raise HclipError(f"{name} must be strictly increasing and positive")
        vector(self.x0)

    def theory(self, K: Optional[int] = None, lam: Optional[float] = None) -> TheoryParams:
        """TheoryParams with problem-derived constants filled in."""
        prob = build_problem(self.problem)
        noise = build_noise(self.noise, prob.d)
        t = dict(self.theory_overrides)
        if "radius" not in t:
            x0 = vector(self.x0)
            if prob.convex and prob.x_star is not None:
                t["radius"] = float(np.linalg.norm(x0 - prob.x_star))
            else:
                t["radius"] = prob.objective(x0) - prob.f_star
        return TheoryParams(
            L=prob.L,
            radius=t["radius"],
            # degenerate (scale 0) noise still needs a positive sigma for the
            # step-size formulas; allow the config to state one explicitly
            sigma=t.get("sigma", noise.sigma),
            alpha=noise.alpha,
            K=K if K is not None else t["K"],
            beta=t.get("beta", 0.1),
            lam=lam if lam is not None else t["lambda"],
            sigma_omega=t.get("sigma_omega", 0.0),
            d=prob.d,
            convex=prob.convex,
        )

    def to_dict(self) -> dict:
        out = {
            "schema": SCHEMA_VERSION,
            "problem": self.problem,
            "noise": self.noise,
            "x0": list(self.x0),
            "theory": dict(self.theory_overrides),
            "trials": self.trials,
            "seed": self.seed,
            "format": self.format,
            "record": self.record,
            "workers": self.workers,
        }
        if self.gamma is not None:
            out["gamma"] = self.gamma
        if self.privacy is not None:
            out["privacy"] = {
                "epsilon": self.privacy.epsilon, "delta": self.privacy.delta,
                "K": self.privacy.K, "regime": self.privacy.regime,
                "q": self.privacy.q, "c_dp": self.privacy.c_dp,
            }
        if self.K_grid is not None:
            out["K_grid"] = list(self.K_grid)
        if self.lambda_grid is not None:
            out["lambda_grid"] = list(self.lambda_grid)
        if self.output_path is not None:
            out["output_path"] = self.output_path
        return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    if raw.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise HclipError(f"unsupported schema {raw.get('schema')!r}")
    privacy = None
    if "privacy" in raw and raw["privacy"] is not None:
        p = raw["privacy"]
        privacy = PrivacyTarget(
            epsilon=p["epsilon"], delta=p["delta"],
            K=p.get("K", raw.get("theory", {}).get("K", 1)),
            regime=p.get("regime", "expectation"), q=p.get("q"),
            c_dp=p.get("c_dp", 1.0),
        )
    return ExperimentConfig(
        problem=raw["problem"],
        noise=raw["noise"],
        x0=raw["x0"],
        theory_overrides=raw.get("theory", {}),
        trials=raw.get("trials", 200),
        privacy=privacy,
        K_grid=raw.get("K_grid"),
        lambda_grid=raw.get("lambda_grid"),
        output_path=raw.get("output_path"),
        format=raw.get("format", "csv"),
        seed=raw.get("seed", 0),
        record=raw.get("record", "none"),
        workers=raw.get("workers", 1),
        gamma=raw.get("gamma"),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))
