"""Kernel evaluation, Gram matrices, and the closed-form eigensystem."""

import numpy as np
import pytest
from numpy.polynomial.hermite import hermgauss

from gpsobol.kernels import (
    GaussianMeasure,
    KernelFamily,
    KernelSpec,
    eval_kernel,
    gaussian_measure_eigensystem,
    gram_matrix,
    hermite_eval,
    matern_eigenvalue_envelope,
    truncation_size,
)


def se_kernel(theta=(1.0,), sigma2=1.0):
    return KernelSpec(KernelFamily.SQUARED_EXPONENTIAL, theta, sigma2)


def matern_kernel(theta=(1.0,), sigma2=1.0, nu=1.5):
    return KernelSpec(KernelFamily.TENSORISED_MATERN, theta, sigma2, nu=nu)


class TestEvalKernel:
    def test_zero_lag_returns_signal_variance(self):
        spec = se_kernel((0.7, 1.3), sigma2=1.46)
        x = np.array([0.4, -2.1])
        assert eval_kernel(spec, x, x) == pytest.approx(1.46, abs=0.0)

    def test_squared_exponential_unit_distance(self):
        assert eval_kernel(se_kernel(), [0.0], [1.0]) == pytest.approx(np.exp(-0.5))

    def test_matern_32_closed_form(self):
        # (1 + sqrt(3) u) exp(-sqrt(3) u) at u = 1, cross-checking the
        # Bessel-based implementation against the nu=3/2 closed form
        u = np.sqrt(3.0)
        expected = (1.0 + u) * np.exp(-u)
        assert eval_kernel(matern_kernel(), [0.0], [1.0]) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.48336, abs=5e-6)

    def test_matern_zero_lag(self):
        spec = matern_kernel((0.5, 2.0), sigma2=2.3, nu=2.5)
        assert eval_kernel(spec, [1.0, 2.0], [1.0, 2.0]) == pytest.approx(2.3)

    @pytest.mark.parametrize("family", ["se", "matern"])
    def test_symmetry_on_random_pairs(self, family):
        spec = se_kernel((0.8, 1.2, 2.0)) if family == "se" else matern_kernel(
            (0.8, 1.2, 2.0), nu=1.5
        )
        rng = np.random.default_rng(7)
        for _ in range(20):
            x, y = rng.normal(size=(2, 3))
            assert eval_kernel(spec, x, y) == pytest.approx(eval_kernel(spec, y, x), rel=1e-14)

    def test_value_range(self):
        spec = se_kernel((1.0, 1.0), sigma2=3.0)
        rng = np.random.default_rng(11)
        for _ in range(50):
            x, y = rng.normal(size=(2, 2))
            v = eval_kernel(spec, x, y)
            assert 0.0 < v <= 3.0

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError, match="dimension"):
            eval_kernel(se_kernel((1.0, 1.0)), [0.0], [1.0, 2.0])

    def test_invalid_parameters_raise(self):
        with pytest.raises(ValueError):
            KernelSpec(KernelFamily.SQUARED_EXPONENTIAL, (-1.0,), 1.0)
        with pytest.raises(ValueError):
            KernelSpec(KernelFamily.SQUARED_EXPONENTIAL, (1.0,), 0.0)
        with pytest.raises(ValueError):
            KernelSpec(KernelFamily.TENSORISED_MATERN, (1.0,), 1.0, nu=0.5)

    def test_config_round_trip(self):
        spec = matern_kernel((0.5, 1.5), sigma2=2.0, nu=2.5)
        again = KernelSpec.from_config(spec.to_config())
        assert again == spec
        cfg = spec.to_config()
        assert set(cfg) == {"family", "lengthscales", "signal_variance", "nu"}


class TestGramMatrix:
    def test_single_point(self):
        g = gram_matrix(se_kernel(sigma2=2.5), [[0.3]])
        np.testing.assert_allclose(g, [[2.5]])

    def test_coincident_points_rank_one(self):
        g = gram_matrix(se_kernel(sigma2=1.7), [[0.2], [0.2]])
        np.testing.assert_allclose(g, 1.7 * np.ones((2, 2)))
        assert np.linalg.matrix_rank(g, tol=1e-12) == 1

    @pytest.mark.parametrize("n", [5, 50, 200])
    def test_psd_up_to_roundoff(self, n):
        rng = np.random.default_rng(n)
        pts = rng.normal(size=(n, 2))
        g = gram_matrix(se_kernel((1.0, 1.0), sigma2=1.3), pts)
        eigvals = np.linalg.eigvalsh(g)
        assert eigvals.min() >= -1e-10 * 1.3 * n

    def test_symmetric_exactly(self):
        rng = np.random.default_rng(3)
        g = gram_matrix(matern_kernel((1.0, 2.0), nu=1.5), rng.normal(size=(20, 2)))
        np.testing.assert_array_equal(g, g.T)


class TestHermite:
    def test_order_zero_is_one(self):
        for t in [-3.0, 0.0, 0.4, 11.0]:
            assert hermite_eval(0, t) == 1.0

    def test_order_two_closed_form(self):
        # H_2(t) = 4 t^2 - 2
        assert hermite_eval(2, 1.5) == pytest.approx(7.0)

    def test_order_six_against_derivative_oracle(self):
        # H_6(t) = e^{t^2} d^6/dt^6 e^{-t^2}; stencil below is O(h^2)
        t, h = 0.3, 0.01
        coeffs = np.array([1, -6, 15, -20, 15, -6, 1], float)
        pts = np.exp(-np.array([t + k * h for k in range(3, -4, -1)]) ** 2)
        oracle = np.exp(t * t) * (coeffs @ pts) / h**6
        assert oracle == pytest.approx(-59.041344, rel=5e-4)  # frozen exact value
        assert hermite_eval(6, t) == pytest.approx(-59.041344, rel=1e-12)

    def test_rejects_orders_above_limit(self):
        with pytest.raises(ValueError, match="exceeds"):
            hermite_eval(201, 0.5)

    def test_reports_overflow(self):
        with pytest.raises(OverflowError):
            hermite_eval(200, 1e3)

    def test_large_order_finite(self):
        assert np.isfinite(hermite_eval(200, 0.7))


class TestMaternEnvelope:
    def test_first_eigenvalue_unit(self):
        assert matern_eigenvalue_envelope(1.5, 1, 1) == pytest.approx(1.0)
        assert matern_eigenvalue_envelope(4.2, 1, 1) == pytest.approx(1.0)

    def test_polynomial_decay_exponent(self):
        # 2 (nu + 1/2) = 4 at nu = 3/2
        assert matern_eigenvalue_envelope(1.5, 1, 100) == pytest.approx(1e-8)

    def test_two_dimensional_log_factor(self):
        # log(11)^4 * 10^-4, recomputed independently
        assert matern_eigenvalue_envelope(1.5, 2, 10) == pytest.approx(
            3.3061370011706046e-3, rel=1e-12
        )

    def test_requires_valid_smoothness(self):
        with pytest.raises(ValueError):
            matern_eigenvalue_envelope(0.5, 1, 10)


def gauss_hermite_points(measure: GaussianMeasure, nodes: int):
    """Quadrature nodes/weights for integration against N(0, sigma_mu^2)."""
    t, w = hermgauss(nodes)
    return np.sqrt(2.0 * measure.variance) * t, w / np.sqrt(np.pi)


class TestEigenSystem:
    measure = GaussianMeasure(1, 4.0)
    spec = se_kernel((1.0,), sigma2=1.0)

    def test_requires_gaussian_kernel(self):
        with pytest.raises(ValueError, match="squared-exponential"):
            gaussian_measure_eigensystem(matern_kernel(), self.measure, 10)

    def test_requires_positive_truncation(self):
        with pytest.raises(ValueError):
            gaussian_measure_eigensystem(self.spec, self.measure, 0)

    def test_spectrum_nonincreasing_and_positive(self):
        eig = gaussian_measure_eigensystem(self.spec, self.measure, 40)
        lam = eig.eigenvalues
        assert np.all(lam > 0.0)
        assert np.all(np.diff(lam) <= 0.0)

    def test_decay_rates_in_unit_interval(self):
        spec = se_kernel((0.5, 2.0), sigma2=1.0)
        eig = gaussian_measure_eigensystem(spec, GaussianMeasure(2, 4.0), 10)
        assert np.all(eig.constants.B > 0.0) and np.all(eig.constants.B < 1.0)

    def test_partial_trace_converges_to_signal_variance(self):
        spec = se_kernel((1.0,), sigma2=1.46)
        sums = []
        for P in [5, 20, 60]:
            eig = gaussian_measure_eigensystem(spec, self.measure, P)
            sums.append(eig.eigenvalues.sum())
            # geometric tail bound: an equality for d = 1, so allow round-off slack
            lam_next = eig.eigenvalues[-1] * eig.constants.B[0]
            bound = lam_next / (1.0 - eig.constants.B[0])
            assert abs(1.46 - eig.eigenvalues.sum()) <= bound + 1e-12 * 1.46
        assert abs(sums[-1] - 1.46) < abs(sums[0] - 1.46)
        assert sums[-1] == pytest.approx(1.46, rel=1e-9)

    def test_orthonormality_under_quadrature(self):
        eig = gaussian_measure_eigensystem(self.spec, self.measure, 10)
        x, w = gauss_hermite_points(self.measure, 96)
        phi = eig.eigenfunctions(x[:, None])
        gram = phi.T @ (w[:, None] * phi)
        np.testing.assert_allclose(gram, np.eye(10), atol=1e-8)

    def test_operator_identity_1d(self):
        eig = gaussian_measure_eigensystem(self.spec, self.measure, 10)
        xq, w = gauss_hermite_points(self.measure, 128)
        phi_q = eig.eigenfunctions(xq[:, None])
        xs = np.linspace(-4.0, 4.0, 20)
        for p in range(10):
            lhs = np.array(
                [
                    np.sum(
                        w
                        * np.exp(-0.5 * (x - xq) ** 2)
                        * phi_q[:, p]
                    )
                    for x in xs
                ]
            )
            rhs = eig.eigenvalues[p] * eig.eigenfunctions(xs[:, None])[:, p]
            scale = np.max(np.abs(rhs))
            np.testing.assert_allclose(lhs, rhs, atol=1e-6 * scale)

    def test_operator_identity_2d(self):
        spec = se_kernel((1.0, 1.5), sigma2=1.2)
        measure = GaussianMeasure(2, 2.0)
        eig = gaussian_measure_eigensystem(spec, measure, 10)
        x1, w = gauss_hermite_points(measure, 64)
        # tensor quadrature grid
        xg, yg = np.meshgrid(x1, x1, indexing="ij")
        quad_pts = np.column_stack([xg.ravel(), yg.ravel()])
        quad_w = np.outer(w, w).ravel()
        phi_q = eig.eigenfunctions(quad_pts)
        rng = np.random.default_rng(5)
        xs = rng.normal(0.0, np.sqrt(measure.variance), size=(20, 2))
        theta = np.array(spec.lengthscales)
        for p in range(10):
            kxq = 1.2 * np.exp(
                -0.5 * np.sum(((xs[:, None, :] - quad_pts[None, :, :]) / theta) ** 2, axis=-1)
            )
            lhs = kxq @ (quad_w * phi_q[:, p])
            rhs = eig.eigenvalues[p] * eig.eigenfunctions(xs)[:, p]
            scale = np.max(np.abs(rhs))
            np.testing.assert_allclose(lhs, rhs, atol=1e-6 * scale)

    def test_orthonormality_2d(self):
        spec = se_kernel((1.0, 1.5), sigma2=1.2)
        measure = GaussianMeasure(2, 2.0)
        eig = gaussian_measure_eigensystem(spec, measure, 10)
        x1, w = gauss_hermite_points(measure, 64)
        xg, yg = np.meshgrid(x1, x1, indexing="ij")
        quad_pts = np.column_stack([xg.ravel(), yg.ravel()])
        quad_w = np.outer(w, w).ravel()
        phi = eig.eigenfunctions(quad_pts)
        gram = phi.T @ (quad_w[:, None] * phi)
        np.testing.assert_allclose(gram, np.eye(10), atol=1e-8)

    def test_multi_index_ordering_ties_lexicographic(self):
        spec = se_kernel((1.0, 1.0), sigma2=1.0)  # symmetric axes: exact ties
        eig = gaussian_measure_eigensystem(spec, GaussianMeasure(2, 4.0), 6)
        idx = [tuple(row) for row in eig.multi_indices]
        assert idx[0] == (0, 0)
        assert idx[1] == (0, 1) and idx[2] == (1, 0)

    def test_truncation_size_certifies_trace_tail(self):
        P = truncation_size(self.spec, self.measure, rel_tol=1e-10)
        eig = gaussian_measure_eigensystem(self.spec, self.measure, P)
        assert eig.trace_gap < 1e-10
        smaller = gaussian_measure_eigensystem(self.spec, self.measure, P - 1)
        assert smaller.trace_gap >= 1e-10

    def test_eigenfunction_single_index_matches_batch(self):
        eig = gaussian_measure_eigensystem(self.spec, self.measure, 8)
        x = np.array([0.37])
        batch = eig.eigenfunctions(x[None, :])
        for p in range(8):
            assert eig.eigenfunction(p, x) == pytest.approx(batch[0, p])
