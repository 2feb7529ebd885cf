"""Regularizers, Fenchel-Young losses, and the Monte-Carlo perturbation maps."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from costru.core import make_rng
from costru.problems.toy import ToyOracle, toy_scenarios
from costru.regularizers import (
    RegularizerKind,
    fy_loss_exact,
    logsumexp_conjugate,
    negentropy_value,
    perturbed_decomposition_target,
    perturbed_fy_gradient,
    perturbed_max_value,
    perturbed_maximizer_moment,
    softmax_distribution,
    sparsemax_distribution,
    squared_l2_value,
    validate_distribution,
)
from costru.simplex_lab import ExplicitOracle, ExplicitPolytope

NEG = RegularizerKind.negentropy()
L2 = RegularizerKind.squared_l2()


def line_oracle():
    """Oracle over the one-dimensional set Y = {0, 1}."""
    return ExplicitOracle(ExplicitPolytope.from_vertices(np.array([[0.0], [1.0]])))


def point_oracle():
    """Degenerate single-point set Y = {0}."""
    return ExplicitOracle(ExplicitPolytope.from_vertices(np.array([[0.0]]), validate=False))


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax_distribution(np.zeros(3)), np.full(3, 1 / 3))

    def test_log_weights(self):
        q = softmax_distribution(np.log(np.array([1.0, 2.0, 3.0])))
        np.testing.assert_allclose(q, np.array([1, 2, 3]) / 6, atol=1e-15)

    def test_overflow_safe_saturation(self):
        q = softmax_distribution(np.array([1000.0, 0.0]))
        assert q[0] == pytest.approx(1.0, abs=1e-300)
        assert q[1] < 1e-300

    @given(st.floats(-50, 50), st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_shift_invariance(self, alpha, seed):
        s = make_rng(seed, 0).generator().standard_normal(5)
        np.testing.assert_allclose(
            softmax_distribution(s + alpha), softmax_distribution(s), atol=1e-12
        )


class TestNegentropy:
    def test_uniform(self):
        assert negentropy_value(np.full(2, 0.5)) == pytest.approx(-np.log(2))

    def test_dirac_zero_log_zero(self):
        assert negentropy_value(np.array([1.0, 0.0])) == 0.0

    def test_direct_evaluation(self):
        q = np.array([0.25, 0.75])
        expected = 0.25 * np.log(0.25) + 0.75 * np.log(0.75)
        assert negentropy_value(q) == pytest.approx(expected, abs=1e-12)


class TestLogSumExp:
    def test_two_zeros(self):
        assert logsumexp_conjugate(np.zeros(2)) == pytest.approx(np.log(2))

    def test_shift_property(self):
        a = 3.7
        assert logsumexp_conjugate(np.full(3, a)) == pytest.approx(a + np.log(3))

    def test_against_simplex_grid_search(self):
        """Conjugate of the negentropy via a dense grid over the simplex."""
        s = make_rng(17, 0).generator().standard_normal(5)
        resolution = 67  # about 1e6 grid points in dimension 5
        k = 5
        best = -np.inf
        for cuts in itertools.combinations(range(resolution + k - 1), k - 1):
            parts = np.diff((-1,) + cuts + (resolution + k - 1,)) - 1
            q = np.asarray(parts, dtype=float) / resolution
            val = float(s @ q) - float(np.sum(q[q > 0] * np.log(q[q > 0])))
            best = max(best, val)
        assert logsumexp_conjugate(s) == pytest.approx(best, abs=1e-4)


class TestExactFyLoss:
    def test_fenchel_equality_case(self):
        s = make_rng(21, 0).generator().standard_normal(6)
        value, grad = fy_loss_exact(s, softmax_distribution(s), NEG)
        assert abs(value) < 1e-12
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_kl_log2(self):
        value, _ = fy_loss_exact(np.zeros(2), np.array([1.0, 0.0]), NEG)
        assert value == pytest.approx(np.log(2))

    @pytest.mark.parametrize("kind", [NEG, L2])
    def test_gradient_finite_differences(self, kind):
        g = make_rng(22, 0).generator()
        s = g.standard_normal(6)
        target = g.dirichlet(np.ones(6)) * 0.98 + 0.02 / 6
        _, grad = fy_loss_exact(s, target, kind)
        h = 1e-6
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            up, _ = fy_loss_exact(s + e, target, kind)
            down, _ = fy_loss_exact(s - e, target, kind)
            assert abs((up - down) / (2 * h) - grad[k]) < 1e-6

    @pytest.mark.parametrize("kind", [NEG, L2])
    def test_nonnegativity_and_zero_iff_prediction(self, kind):
        g = make_rng(23, 0).generator()
        for trial in range(200):
            dim = int(g.integers(2, 9))
            s = g.standard_normal(dim)
            target = g.dirichlet(np.ones(dim))
            value, _ = fy_loss_exact(s, target, kind)
            assert value >= -1e-10
            # forward direction: at the prediction the loss vanishes
            from costru.regularizers import omega_conjugate_grad

            pred = omega_conjugate_grad(s, kind)
            v0, _ = fy_loss_exact(s, pred, kind)
            assert abs(v0) < 1e-10
            # reverse direction: zero loss forces target == prediction
            if value < 1e-10:
                np.testing.assert_allclose(target, pred, atol=1e-6)

    def test_invalid_distribution_rejected(self):
        with pytest.raises(Exception):
            fy_loss_exact(np.zeros(2), np.array([0.7, 0.7]), NEG)


class TestSparsemax:
    def test_is_distribution(self):
        g = make_rng(24, 0).generator()
        for _ in range(100):
            p = sparsemax_distribution(g.standard_normal(5))
            validate_distribution(p)

    def test_squared_l2_value(self):
        assert squared_l2_value(np.array([0.5, 0.5])) == pytest.approx(0.25)


class TestPerturbedMaxValue:
    def test_degenerate_single_point(self):
        value = perturbed_max_value(point_oracle(), np.array([3.0]), 1.0, 64, make_rng(1, 1))
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_half_normal_mean(self):
        m = 40000
        value = perturbed_max_value(line_oracle(), np.array([0.0]), 1.0, m, make_rng(2, 1))
        target = 1.0 / np.sqrt(2 * np.pi)
        sigma = 0.6 / np.sqrt(m)  # conservative bound on the estimator sd
        assert abs(value - target) < 3 * sigma

    def test_monotone_in_theta_with_common_draws(self):
        rng = make_rng(3, 1)
        lo = perturbed_max_value(line_oracle(), np.array([0.1]), 1.0, 500, rng)
        hi = perturbed_max_value(line_oracle(), np.array([0.4]), 1.0, 500, rng)
        assert hi >= lo


class TestPerturbedMoment:
    def test_probability_half(self):
        m = 40000
        mu = perturbed_maximizer_moment(line_oracle(), np.array([0.0]), 1.0, m, make_rng(4, 1))
        assert abs(mu[0] - 0.5) < 3 * 0.5 / np.sqrt(m)

    def test_vanishing_perturbation_recovers_argmax(self):
        mu = perturbed_maximizer_moment(line_oracle(), np.array([2.0]), 1e-6, 200, make_rng(5, 1))
        np.testing.assert_array_equal(mu, np.array([1.0]))

    def test_in_hull(self):
        from costru.core import nearest_point_in_hull_sq

        g = make_rng(6, 0).generator()
        verts = np.array(list(itertools.product([0.0, 1.0], repeat=3)))
        poly = ExplicitPolytope.from_vertices(verts, validate=False)
        oracle = ExplicitOracle(poly)
        mu = perturbed_maximizer_moment(oracle, g.standard_normal(3), 0.5, 256, make_rng(6, 1))
        assert nearest_point_in_hull_sq(mu, verts) < 1e-9


class TestPerturbedFyGradient:
    def test_fixed_point_zero_gradient(self):
        rng = make_rng(7, 1)
        theta = np.array([0.3])
        mu = perturbed_maximizer_moment(line_oracle(), theta, 1.0, 300, rng)
        _, grad = perturbed_fy_gradient(line_oracle(), theta, mu, 1.0, 300, rng)
        np.testing.assert_allclose(grad, 0.0, atol=1e-14)

    def test_target_one_gradient(self):
        m = 40000
        _, grad = perturbed_fy_gradient(
            line_oracle(), np.array([0.0]), np.array([1.0]), 1.0, m, make_rng(8, 1)
        )
        assert abs(grad[0] + 0.5) < 3 * 0.5 / np.sqrt(m)

    def test_gradient_matches_loss_differences(self):
        """Central differences of the shifted loss with common draws."""
        g = make_rng(9, 0).generator()
        verts = np.array(list(itertools.product([0.0, 1.0], repeat=4)))
        poly = ExplicitPolytope.from_vertices(verts, validate=False)
        oracle = ExplicitOracle(poly)
        theta = g.standard_normal(4)
        target = poly.moment(g.dirichlet(np.ones(len(verts))))
        rng = make_rng(9, 1)
        m = 100000
        _, grad = perturbed_fy_gradient(oracle, theta, target, 1.0, m, rng)
        h = 1e-3
        fd = np.empty(4)
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            up, _ = perturbed_fy_gradient(oracle, theta + e, target, 1.0, m, rng)
            down, _ = perturbed_fy_gradient(oracle, theta - e, target, 1.0, m, rng)
            fd[k] = (up - down) / (2 * h)
        assert np.linalg.norm(fd - grad) / np.linalg.norm(grad) < 1e-3


class TestPerturbedDecompositionTarget:
    def test_toy_closed_forms(self):
        """Normal-CDF expressions for the tabular scenario targets."""
        oracle = ToyOracle()
        scenarios = toy_scenarios()
        m = 10000
        expected = [norm.cdf(4.0), norm.cdf(-1.0), norm.cdf(-2.0)]
        for scenario, mu_true in zip(scenarios, expected):
            mu = perturbed_decomposition_target(
                oracle, np.zeros(1), scenario, 1.0, 1.0, m,
                make_rng(10, scenario.noise_payload),
            )
            sigma = np.sqrt(mu_true * (1 - mu_true) / m)
            assert abs(mu[0] - mu_true) < 3 * max(sigma, 1e-6)

    def test_large_kappa_approaches_maximizer_moment(self):
        oracle = ToyOracle()
        scenario = toy_scenarios()[0]
        rng = make_rng(11, 1)
        theta = np.array([0.4])
        mu = perturbed_decomposition_target(oracle, theta, scenario, 1e9, 1.0, 400, rng)
        moment = perturbed_maximizer_moment(oracle, theta, 1.0, 400, rng)
        np.testing.assert_allclose(mu, moment, atol=1e-12)


class TestConjugateAndAffineIdentities:
    def test_negentropy_conjugate_identity(self):
        """Moment-space log-partition equals lifted log-sum-exp."""
        g = make_rng(12, 0).generator()
        verts = np.array(list(itertools.product([0.0, 1.0], repeat=3)))
        poly = ExplicitPolytope.from_vertices(verts, validate=False)
        for _ in range(20):
            theta = g.standard_normal(3)
            lse = logsumexp_conjugate(poly.lift_scores(theta))
            direct = np.log(np.sum(np.exp(verts @ theta)))
            assert abs(lse - direct) < 1e-12

    def test_perturbation_per_draw_identity(self):
        """Moment-space and distribution-space perturbed maxima coincide
        draw by draw when the draws are shared."""
        g = make_rng(13, 0).generator()
        verts = np.eye(4)  # distribution-polytope geometry, V-perp = span(1)
        poly = ExplicitPolytope.from_vertices(verts)
        theta = g.standard_normal(4)
        eps = 0.7
        z = make_rng(13, 1).generator().standard_normal((128, 4))
        s = poly.lift_scores(theta)
        for zj in z:
            moment_side = np.max((theta + eps * zj) @ poly.matrix)
            dist_side = np.max(s + eps * (poly.matrix.T @ zj))
            assert abs(moment_side - dist_side) < 1e-12

    def test_affine_over_orthogonal_complement(self):
        """Adding a vector orthogonal to the vertex differences shifts the
        perturbed max affinely and leaves the moment unchanged."""
        verts = np.eye(3)
        poly = ExplicitPolytope.from_vertices(verts)
        oracle = ExplicitOracle(poly)
        g = make_rng(14, 0).generator()
        theta = g.standard_normal(3)
        alpha = 0.83
        rng = make_rng(14, 1)
        v0 = perturbed_max_value(oracle, theta, 0.5, 200, rng)
        v1 = perturbed_max_value(oracle, theta + alpha, 0.5, 200, rng)
        # every vertex has coordinate sum 1, so <alpha 1 | y0> = alpha
        assert abs(v1 - (v0 + alpha)) < 1e-12
        m0 = perturbed_maximizer_moment(oracle, theta, 0.5, 200, rng)
        m1 = perturbed_maximizer_moment(oracle, theta + alpha, 0.5, 200, rng)
        np.testing.assert_allclose(m0, m1, atol=1e-12)


class TestRegularizerKindValidation:
    def test_bad_tag(self):
        with pytest.raises(Exception):
            RegularizerKind("huber")

    def test_bad_epsilon(self):
        with pytest.raises(Exception):
            RegularizerKind.sparse_perturbation(-1.0, 10)

    def test_bad_samples(self):
        with pytest.raises(Exception):
            RegularizerKind.sparse_perturbation(1.0, 0)
