import math

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from hclip.errors import (
    InvalidDimensionError,
    InvalidProblemError,
    MomentUnboundedError,
)
from hclip.numkit import RngStream
from hclip.oracles import (
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


def finite_difference_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def assert_gradient_matches(problem, points, rtol=1e-5):
    for x in points:
        g = problem.gradient(x)
        fd = finite_difference_gradient(problem.objective, x)
        assert np.allclose(g, fd, rtol=rtol, atol=1e-7)
        fv, gv = problem.eval_both(x)
        assert fv == problem.objective(x)
        assert np.array_equal(gv, g)


class TestQuadratic:
    def test_scalar_instance(self):
        p = make_quadratic(1, [2.0], [0.0])
        assert p.objective(np.array([3.0])) == 9.0
        assert np.array_equal(p.gradient(np.array([3.0])), [6.0])
        assert p.L == 2.0 and p.convex and p.f_star == 0.0

    def test_optimum(self):
        p = make_quadratic(2, [1.0, 4.0], [1.0, 1.0])
        x = np.array([1.0, 1.0])
        assert p.objective(x) == 0.0
        assert np.array_equal(p.gradient(x), np.zeros(2))

    def test_lipschitz_over_random_pairs(self):
        p = make_quadratic(2, [1.0, 4.0], [0.0, 0.0])
        rng = np.random.default_rng(0)
        for _ in range(100):
            x, y = rng.normal(size=2), rng.normal(size=2)
            lhs = np.linalg.norm(p.gradient(x) - p.gradient(y))
            assert lhs <= p.L * np.linalg.norm(x - y) + 1e-12

    def test_convexity_inequality_sampled(self):
        p = make_quadratic(3, [0.5, 1.0, 2.0], [0.0, 1.0, -1.0])
        rng = np.random.default_rng(1)
        for _ in range(100):
            x, y = rng.normal(size=3), rng.normal(size=3)
            assert (p.objective(y) >= p.objective(x)
                    + float(np.dot(p.gradient(x), y - x)) - 1e-12)

    def test_gradient_finite_differences(self):
        p = make_quadratic(4, [0.1, 0.5, 1.0, 2.0], [0.0, 0.0, 1.0, -1.0])
        pts = np.random.default_rng(2).normal(size=(100, 4))
        assert_gradient_matches(p, pts)

    def test_rejects_bad_eigenvalues(self):
        with pytest.raises(InvalidProblemError):
            make_quadratic(2, [1.0, 0.0], [0.0, 0.0])
        with pytest.raises(InvalidProblemError):
            make_quadratic(2, [1.0], [0.0, 0.0])


class TestNonconvexSmooth:
    def test_origin(self):
        p = make_nonconvex_smooth(1, 1.0)
        assert p.objective(np.zeros(1)) == 0.0
        assert np.array_equal(p.gradient(np.zeros(1)), np.zeros(1))

    def test_hand_gradient(self):
        p = make_nonconvex_smooth(1, 1.0)
        assert p.objective(np.array([1.0])) == 0.5
        assert np.allclose(p.gradient(np.array([1.0])), [0.5])

    def test_curvature_grid_scan(self):
        # dense 1-D scan of |f''| = |(2 - 6x^2) / (1+x^2)^3| stays below L = 2
        xs = np.linspace(-50.0, 50.0, 400_001)
        second = np.abs((2.0 - 6.0 * xs ** 2) / (1.0 + xs ** 2) ** 3)
        assert float(second.max()) <= 2.0
        assert make_nonconvex_smooth(3, 1.0).L == 2.0
        assert make_nonconvex_smooth(3, 2.5).L == 5.0

    def test_gradient_finite_differences(self):
        p = make_nonconvex_smooth(5, 1.7)
        pts = np.random.default_rng(3).normal(size=(100, 5), scale=2.0)
        assert_gradient_matches(p, pts)

    def test_lower_bounded(self):
        p = make_nonconvex_smooth(2, 1.0)
        for x in np.random.default_rng(4).normal(size=(50, 2), scale=10.0):
            assert p.objective(x) >= p.f_star

    def test_rejects_bad_args(self):
        with pytest.raises(InvalidProblemError):
            make_nonconvex_smooth(2, 0.0)
        with pytest.raises(InvalidDimensionError):
            make_nonconvex_smooth(0, 1.0)


class TestLogistic:
    def test_gradient_finite_differences(self):
        p = make_logistic(5, 200, seed=0)
        pts = np.random.default_rng(5).normal(size=(20, 5))
        assert_gradient_matches(p, pts, rtol=1e-4)

    def test_f_star_is_minimum(self):
        p = make_logistic(4, 100, seed=1)
        assert np.linalg.norm(p.gradient(p.x_star)) < 1e-5
        for x in np.random.default_rng(6).normal(size=(20, 4)):
            assert p.objective(x) >= p.f_star - 1e-9


class TestParetoNoise:
    def test_certified_moment_closed_form(self):
        assert make_pareto_noise(1.5, 2.5, 1.0, 2).sigma_alpha == 2.5
        assert make_pareto_noise(2.0, 3.0, 1.0, 2).sigma_alpha == 3.0

    def test_certified_moment_vs_quadrature(self):
        # independent check: E[r^a] = integral over u in (0,1) of u^(-a/p) du
        from scipy.integrate import quad
        for a, p, s in [(1.2, 2.0, 1.0), (1.5, 2.5, 0.7), (2.0, 4.0, 2.0)]:
            val, _ = quad(lambda u: (s * u ** (-1.0 / p)) ** a, 0.0, 1.0)
            assert make_pareto_noise(a, p, s, 3).sigma_alpha == pytest.approx(val, rel=1e-8)

    def test_empirical_moment_certified(self):
        noise = make_pareto_noise(1.5, 2.5, 1.0, 4)
        draws = noise.sample_matrix(RngStream(0, 0), 1_000_000)
        emp = float(np.mean(np.linalg.norm(draws, axis=1) ** noise.alpha))
        assert emp <= 1.1 * noise.sigma_alpha

    def test_zero_mean(self):
        noise = make_pareto_noise(1.5, 2.5, 1.0, 3)
        draws = noise.sample_matrix(RngStream(1, 0), 100_000)
        # heavy tails: median-of-means over 100 chunks
        mom = np.median(draws.reshape(100, -1, 3).mean(axis=1), axis=0)
        assert np.all(np.abs(mom) < 0.05)

    def test_infinite_variance_sanity(self):
        # tail_p = 2: partial-mean variance should grow, not settle
        noise = make_pareto_noise(1.5, 2.0, 1.0, 1)
        draws = noise.sample_matrix(RngStream(2, 0), 400_000)[:, 0]
        v_small = np.var(draws[:4000])
        v_large = np.var(draws)
        assert v_large > v_small  # not a hard law, but holds at these sizes

    def test_rejects_unbounded_moment(self):
        with pytest.raises(MomentUnboundedError):
            make_pareto_noise(1.5, 1.5, 1.0, 2)


class TestStudentTNoise:
    def test_moment_matches_closed_form(self):
        # E|T_nu|^a = nu^(a/2) G((a+1)/2) G((nu-a)/2) / (sqrt(pi) G(nu/2))
        for a, nu in [(1.5, 3.0), (1.2, 2.1), (2.0, 5.0)]:
            exact = (nu ** (a / 2.0) * gamma_fn((a + 1.0) / 2.0)
                     * gamma_fn((nu - a) / 2.0)
                     / (math.sqrt(math.pi) * gamma_fn(nu / 2.0)))
            got = make_student_t_noise(a, nu, 1.0, 2).sigma_alpha
            assert got == pytest.approx(exact, rel=1e-8)

    def test_scale_power(self):
        base = make_student_t_noise(1.5, 3.0, 1.0, 2).sigma_alpha
        scaled = make_student_t_noise(1.5, 3.0, 2.0, 2).sigma_alpha
        assert scaled == pytest.approx(2.0 ** 1.5 * base, rel=1e-12)

    def test_rejects_nu_below_alpha(self):
        with pytest.raises(MomentUnboundedError):
            make_student_t_noise(1.5, 1.4, 1.0, 2)


class TestGaussianNoise:
    def test_chi_moment(self):
        # alpha = 2: E||xi||^2 = d * scale^2 exactly
        assert make_gaussian_noise(2.0, 3.0, 7).sigma_alpha == pytest.approx(63.0, rel=1e-12)

    def test_empirical_moment(self):
        noise = make_gaussian_noise(1.5, 1.0, 4)
        draws = noise.sample_matrix(RngStream(3, 0), 200_000)
        emp = float(np.mean(np.linalg.norm(draws, axis=1) ** 1.5))
        assert emp == pytest.approx(noise.sigma_alpha, rel=0.02)


class TestTwoPointNoise:
    def test_support_and_moment(self):
        noise = make_two_point_noise(1.5, 2.0, 3)
        assert noise.sigma_alpha == pytest.approx(2.0 ** 1.5, rel=1e-15)
        draws = noise.sample_matrix(RngStream(4, 0), 1000)
        assert set(np.unique(draws[:, 0])) == {-2.0, 2.0}
        assert np.all(draws[:, 1:] == 0.0)


class TestSampleGradient:
    def test_zero_noise_returns_gradient(self):
        p = make_quadratic(1, [2.0], [-1.0])
        oracle = StochasticOracle(p, make_pareto_noise(1.5, 2.5, 0.0, 1))
        out = sample_gradient(oracle, np.array([1.0]), RngStream(0, 0))
        assert np.array_equal(out, [4.0])

    def test_unbiasedness_median_of_means(self):
        p = make_quadratic(2, [1.0, 2.0], [0.0, 0.0])
        oracle = StochasticOracle(p, make_pareto_noise(1.5, 2.5, 1.0, 2))
        x = np.array([1.0, -1.0])
        rng = RngStream(5, 0)
        draws = np.stack([sample_gradient(oracle, x, rng) for _ in range(20_000)])
        mom = np.median(draws.reshape(100, -1, 2).mean(axis=1), axis=0)
        assert np.allclose(mom, p.gradient(x), atol=0.1)

    def test_dimension_mismatch(self):
        p = make_quadratic(2, [1.0, 1.0], [0.0, 0.0])
        oracle = StochasticOracle(p, make_pareto_noise(1.5, 2.5, 1.0, 2))
        with pytest.raises(InvalidDimensionError):
            sample_gradient(oracle, np.zeros(3), RngStream(0, 0))

    def test_one_draw_per_call(self):
        p = make_quadratic(2, [1.0, 1.0], [0.0, 0.0])
        oracle = StochasticOracle(p, make_pareto_noise(1.5, 2.5, 1.0, 2))
        rng = RngStream(6, 0)
        for expected in (1, 2, 3):
            sample_gradient(oracle, np.zeros(2), rng)
            assert rng.noise_draws == expected
