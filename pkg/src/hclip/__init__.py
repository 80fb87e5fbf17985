"""Clipped SGD under heavy-tailed gradient noise.

Library and CLI for the differentially private clipped stochastic gradient
method: exact step-size schedules, clipping-regime classification, Gaussian
mechanism calibration, a Monte Carlo verifier for the clipped-moment bounds,
and a seeded multi-trial harness that checks the high-probability convergence
bounds empirically.
"""

from .clipping import clip, clip_factor_c, theta
from .config import ExperimentConfig, build_noise, build_problem, load_config
from .errors import (
    DivergedError,
    HclipError,
    InvalidDimensionError,
    InvalidProblemError,
    InvalidTargetError,
    MomentUnboundedError,
    TablesNotApplicableError,
)
from .harness import check_bound, persist, quantile, rate_fit, run_trials
from .numkit import RngStream, norm, vector
from .optimizer import RunConfig, RunRecord, run, run_with_theory
from .oracles import (
    NoiseModel,
    ProblemSpec,
    StochasticOracle,
    make_gaussian_noise,
    make_logistic,
    make_nonconvex_smooth,
    make_pareto_noise,
    make_quadratic,
    make_student_t_noise,
    make_two_point_noise,
    sample_gradient,
)
from .privacy import PrivacyTarget, calibrate_sigma_omega, invert_lambda_budget
from .schedule import (
    RegimeReport,
    StepsizeParts,
    TheoryParams,
    classify_regime,
    optimal_lambda_dp,
    stepsize_convex_full,
    stepsize_convex_reduced,
    stepsize_nonconvex_full,
    theory_bound,
    zeta_lambda,
)
from .verifier import (
    LemmaScenario,
    default_grid,
    estimate_clipped_moments,
    lemma_bias_bound,
    lemma_variance_bound,
    sweep_lemma,
)

__version__ = "0.1.0"
