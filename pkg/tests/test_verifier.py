import math

import numpy as np
import pytest

import formula_oracle as oracle
from hclip.errors import HclipError
from hclip.numkit import RngStream
from hclip.oracles import make_pareto_noise, make_two_point_noise
from hclip.verifier import (
    SWEEP_COLUMNS,
    LemmaScenario,
    default_grid,
    estimate_clipped_moments,
    lemma_bias_bound,
    lemma_variance_bound,
    sweep_lemma,
    write_sweep_csv,
)


def scenario(alpha=1.5, scale=1.0, x=None, lam=2.0, d=2, n=10_000, seed=0,
             tail_p=2.5):
    noise = make_pareto_noise(alpha, tail_p, scale, d)
    if x is None:
        x = np.zeros(d)
    return LemmaScenario(d=d, x=np.asarray(x, dtype=float), noise=noise,
                         lam=lam, n_samples=n, rng=RngStream(seed, 0))


class TestBounds:
    def test_bias_zero_when_no_noise_and_mean_inside(self):
        sc = scenario(scale=0.0, x=[0.5, 0.0], lam=2.0)
        assert lemma_bias_bound(sc) == 0.0
        assert lemma_variance_bound(sc) == 0.0

    def test_bias_hand_value(self):
        # alpha=2, sigma=1, ||x||=0, lam=2 -> 8*1/2 + 1*8/4 = 6
        sc = scenario(alpha=2.0, tail_p=3.0, scale=(1.0 / 3.0) ** 0.5,
                      x=[0.0, 0.0], lam=2.0)
        assert sc.noise.sigma == pytest.approx(1.0, rel=1e-12)
        assert lemma_bias_bound(sc) == pytest.approx(6.0, rel=1e-12)

    def test_variance_hand_value(self):
        # alpha=2, sigma=1, ||x||=0, lam=3 -> 9*9/4 = 20.25
        sc = scenario(alpha=2.0, tail_p=3.0, scale=(1.0 / 3.0) ** 0.5,
                      x=[0.0, 0.0], lam=3.0)
        assert lemma_variance_bound(sc) == pytest.approx(20.25, rel=1e-12)

    def test_bias_vanishes_for_huge_lambda(self):
        # decays like lam^-(alpha-1), so the limit is 0 but approach is slow
        vals = [lemma_bias_bound(scenario(lam=lam, x=[1.0, 0.0]))
                for lam in (1e3, 1e6, 1e9, 1e12)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-4

    def test_variance_monotone_in_sigma(self):
        lo = lemma_variance_bound(scenario(scale=0.5))
        hi = lemma_variance_bound(scenario(scale=1.5))
        assert hi > lo

    def test_matches_independent_formulas(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = float(rng.uniform(1.05, 2.0))
            sc = scenario(alpha=a, tail_p=a + 1.0,
                          scale=float(rng.uniform(0.1, 3.0)),
                          x=[float(rng.uniform(0.0, 5.0)), 0.0],
                          lam=float(rng.uniform(0.1, 10.0)))
            sig, xn = sc.noise.sigma, float(np.linalg.norm(sc.x))
            assert lemma_bias_bound(sc) == pytest.approx(
                oracle.bias_bound(a, sig, xn, sc.lam), rel=1e-12)
            assert lemma_variance_bound(sc) == pytest.approx(
                oracle.variance_bound(a, sig, xn, sc.lam), rel=1e-12)


class TestEstimate:
    def test_point_mass_inside_half_level(self):
        sc = scenario(scale=0.0, x=[0.5, 0.0], lam=2.0, n=5000)
        bias, var, (bb, bv) = estimate_clipped_moments(sc)
        assert bias == 0.0 and var == 0.0

    def test_two_point_symmetric_hits_lambda_squared(self):
        lam = 1.5
        noise = make_two_point_noise(1.5, 10.0 * lam, 1)
        sc = LemmaScenario(d=1, x=np.zeros(1), noise=noise, lam=lam,
                           n_samples=200_000, rng=RngStream(1, 0))
        bias, var, _ = estimate_clipped_moments(sc)
        assert bias < 0.02
        assert var == pytest.approx(lam ** 2, rel=1e-3)
        assert var <= lemma_variance_bound(sc)

    def test_pareto_scenario_below_bounds(self):
        sc = scenario(alpha=1.5, tail_p=2.5, scale=1.0, x=[1.0, 0.0, 0.0, 0.0],
                      lam=2.0, d=4, n=200_000)
        bias, var, (bb, bv) = estimate_clipped_moments(sc)
        assert bias + 0.0 <= lemma_bias_bound(sc) + bb
        assert var <= lemma_variance_bound(sc) + bv
        assert bb > 0.0 and bv > 0.0

    def test_deterministic_given_stream(self):
        a = estimate_clipped_moments(scenario(n=20_000, seed=5))
        b = estimate_clipped_moments(scenario(n=20_000, seed=5))
        assert a[0] == b[0] and a[1] == b[1] and a[2] == b[2]


class TestSweep:
    def test_empty_grid_rejected(self):
        with pytest.raises(HclipError):
            sweep_lemma([])

    def test_single_trivial_row(self):
        rows = sweep_lemma([scenario(scale=0.0, x=[0.0, 0.0], n=2000)])
        assert rows[0]["pass"] is True
        assert rows[0]["emp_bias"] == 0.0 and rows[0]["emp_var"] == 0.0

    def test_default_grid_shape(self):
        grid = default_grid(n_samples=1000)
        assert len(grid) == 75
        alphas = {sc.noise.alpha for sc in grid}
        assert alphas == {1.2, 1.5, 2.0}
        # per-row independent streams
        assert len({sc.rng.stream_id for sc in grid}) == 75

    def test_small_sweep_passes_and_serializes(self, tmp_path):
        rows = sweep_lemma(default_grid(n_samples=20_000))
        assert len(rows) == 75
        assert all(set(SWEEP_COLUMNS) <= set(r) for r in rows)
        path = tmp_path / "sweep.csv"
        write_sweep_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 76
