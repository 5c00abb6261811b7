import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, simpson
from scipy.interpolate import BSpline

from romfcc import basis as B
from romfcc.errors import (
    DegenerateBasisError,
    InvalidConfigurationError,
    RankDeficientFitError,
    ValidationError,
)


class TestBuildBasis:
    def test_cubic_ten_uniform_knots(self):
        bs = B.build_basis(4, 10)
        assert bs.n_basis == 10
        np.testing.assert_allclose(bs.interior_knots, np.arange(1, 7) / 7)

    def test_single_segment(self):
        bs = B.build_basis(4, 4)
        assert bs.interior_knots == ()
        assert bs.n_basis == 4

    def test_linear_one_knot(self):
        bs = B.build_basis(2, 3)
        np.testing.assert_allclose(bs.interior_knots, [0.5])

    def test_rejects_too_few_basis_functions(self):
        with pytest.raises(InvalidConfigurationError):
            B.build_basis(4, 3)

    def test_rejects_order_below_two(self):
        with pytest.raises(InvalidConfigurationError):
            B.build_basis(1, 5)


class TestEvalBasis:
    def test_partition_of_unity_on_random_grid(self, bs10):
        rng = np.random.default_rng(0)
        grid = np.sort(rng.uniform(0, 1, 200))
        phi = B.eval_basis(bs10, grid)
        np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-12)
        assert (phi >= 0).all()

    def test_left_endpoint_hits_first_function(self, bs10):
        phi = B.eval_basis(bs10, np.array([0.0]))
        assert phi[0, 0] == pytest.approx(1.0, abs=1e-14)
        assert np.abs(phi[0, 1:]).max() < 1e-14

    def test_right_endpoint_hits_last_function(self, bs10):
        phi = B.eval_basis(bs10, np.array([1.0]))
        assert phi[0, -1] == pytest.approx(1.0, abs=1e-14)

    def test_linear_hat_functions_at_midpoint(self):
        bs = B.build_basis(2, 2)
        phi = B.eval_basis(bs, np.array([0.5]))
        np.testing.assert_allclose(phi[0], [0.5, 0.5], atol=1e-14)

    def test_rejects_out_of_domain(self, bs10):
        with pytest.raises(ValidationError):
            B.eval_basis(bs10, np.array([0.0, 1.5]))

    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_partition_of_unity_pointwise(self, t):
        bs = B.build_basis(4, 10)
        phi = B.eval_basis(bs, np.array([t]))
        assert abs(phi.sum() - 1.0) < 1e-12


class TestGram:
    def test_identity_stub(self):
        gm = B.GramMatrix.from_w(np.eye(6))
        np.testing.assert_allclose(gm.W_half, np.eye(6), atol=1e-14)
        np.testing.assert_allclose(gm.W_half_inv, np.eye(6), atol=1e-14)

    def test_symmetric_positive_definite(self, gm10):
        np.testing.assert_allclose(gm10.W, gm10.W.T, atol=1e-15)
        assert np.linalg.eigvalsh(gm10.W).min() > 0

    def test_root_squares_back(self, gm10):
        err = np.linalg.norm(gm10.W_half @ gm10.W_half - gm10.W)
        assert err / np.linalg.norm(gm10.W) < 1e-10

    def test_row_sum_matches_adaptive_quadrature(self, bs10, gm10):
        # row sums of W are integrals of single basis functions
        spline = BSpline(bs10.knot_vector, np.eye(10)[0], bs10.degree)
        oracle, _ = quad(spline, 0, 1, limit=200)
        assert gm10.W[0].sum() == pytest.approx(oracle, abs=1e-10)

    def test_rejects_singular_w(self):
        w = np.eye(4)
        w[2, 2] = 1e-16
        with pytest.raises(DegenerateBasisError):
            B.GramMatrix.from_w(w)

    def test_gram_consistency_random_pairs(self, bs10, gm10):
        # <f, g> via W equals adaptive quadrature of f * g (knots passed as
        # breakpoints: the integrand is only piecewise smooth across them)
        rng = np.random.default_rng(3)
        breaks = list(bs10.breakpoints)
        for _ in range(100):
            a = rng.standard_normal(10)
            c = rng.standard_normal(10)
            f = BSpline(bs10.knot_vector, a, bs10.degree)
            g = BSpline(bs10.knot_vector, c, bs10.degree)
            oracle, _ = quad(lambda t: f(t) * g(t), 0, 1, points=breaks, limit=200)
            assert a @ gm10.W @ c == pytest.approx(oracle, rel=1e-8, abs=1e-12)


class TestSmoothing:
    def test_interpolates_basis_function(self, bs10):
        grid = np.linspace(0, 1, 100)
        y = B.eval_basis(bs10, grid)[:, 3]
        coefs = B.smooth_curve(y, grid, bs10, lam=0.0)
        np.testing.assert_allclose(coefs, np.eye(10)[3], atol=1e-8)

    def test_in_span_interpolation_error(self, bs10):
        rng = np.random.default_rng(1)
        grid = np.linspace(0, 1, 100)
        phi = B.eval_basis(bs10, grid)
        truth = rng.standard_normal(10)
        coefs = B.smooth_curve(phi @ truth, grid, bs10, lam=0.0)
        assert np.abs(phi @ coefs - phi @ truth).max() < 1e-8

    @pytest.mark.parametrize("lam", [0.0, 1e-4, 1.0, 1e2])
    def test_constants_are_penalty_null(self, bs10, lam):
        # lam spans the supported GCV range; far beyond it the normal
        # equations are too ill-conditioned for 1e-8 accuracy in float64
        grid = np.linspace(0, 1, 100)
        coefs = B.smooth_curve(np.full(100, 3.0), grid, bs10, lam=lam)
        fitted = B.eval_basis(bs10, grid) @ coefs
        np.testing.assert_allclose(fitted, 3.0, atol=1e-8)

    def test_huge_penalty_converges_to_regression_line(self, bs10):
        # direct linear regression oracle for the lam -> inf limit
        rng = np.random.default_rng(2)
        grid = np.linspace(0, 1, 100)
        y = np.sin(2 * np.pi * grid) + 0.05 * rng.standard_normal(100)
        phi = B.eval_basis(bs10, grid)
        line = np.polyval(np.polyfit(grid, y, 1), grid)
        err = {
            lam: np.abs(phi @ B.smooth_curve(y, grid, bs10, lam=lam) - line).max()
            for lam in (1e2, 1e6)
        }
        assert err[1e6] < 1e-4
        assert err[1e6] < err[1e2]

    def test_gcv_scale_covariance(self, bs10):
        rng = np.random.default_rng(4)
        grid = np.linspace(0, 1, 100)
        y = np.sin(2 * np.pi * grid) + 0.1 * rng.standard_normal(100)
        c1, l1 = B.smooth_curves(y, grid, bs10, "gcv")
        c2, l2 = B.smooth_curves(7.5 * y, grid, bs10, "gcv")
        assert l1 == l2
        np.testing.assert_allclose(c2, 7.5 * c1, rtol=1e-10)

    def test_batch_shapes(self, bs10):
        rng = np.random.default_rng(5)
        grid = np.linspace(0, 1, 60)
        coefs, lams = B.smooth_curves(rng.standard_normal((4, 3, 60)), grid, bs10, "gcv")
        assert coefs.shape == (4, 3, 10)
        assert lams.shape == (4, 3)

    def test_unpenalized_needs_enough_points(self, bs10):
        grid = np.linspace(0, 1, 5)
        with pytest.raises(ValidationError):
            B.smooth_curve(np.ones(5), grid, bs10, lam=0.0)

    def test_rank_deficient_fit_raises(self):
        # 12 observation points crammed into one knot span cannot pin down
        # 12 basis functions: the lambda=0 normal equations are singular
        bs = B.build_basis(4, 12)
        grid = np.linspace(0.4, 0.45, 12)
        grid = np.r_[np.linspace(0.0, 0.39, 0), grid]
        with pytest.raises(RankDeficientFitError):
            B.smooth_curve(np.ones(grid.size), grid, bs, lam=0.0)

    def test_gcv_recovers_smooth_signal(self, bs10):
        rng = np.random.default_rng(6)
        grid = np.linspace(0, 1, 100)
        signal = np.sin(2 * np.pi * grid)
        y = signal + 0.05 * rng.standard_normal(100)
        coefs, lam = B.smooth_curves(y, grid, bs10, "gcv")
        fitted = B.eval_basis(bs10, grid) @ coefs
        assert np.sqrt(np.mean((fitted - signal) ** 2)) < 0.05
        assert B.GCV_GRID[0] <= lam <= B.GCV_GRID[-1]


class TestInnerProduct:
    def test_zero(self, gm10):
        z = np.zeros((2, 10))
        assert B.inner_product(z, z, gm10) == 0.0

    def test_identity_stub_unit_vector(self):
        gm = B.GramMatrix.from_w(np.eye(10))
        e1 = np.zeros((1, 10))
        e1[0, 0] = 1.0
        assert B.inner_product(e1, e1, gm) == pytest.approx(1.0)

    def test_matches_quadrature_oracle(self, bs10, gm10):
        rng = np.random.default_rng(7)
        grid = np.linspace(0, 1, 4001)
        phi = B.eval_basis(bs10, grid)
        a = rng.standard_normal((3, 10))
        c = rng.standard_normal((3, 10))
        oracle = sum(simpson((phi @ a[j]) * (phi @ c[j]), x=grid) for j in range(3))
        assert B.inner_product(a, c, gm10) == pytest.approx(oracle, rel=1e-8)

    def test_shape_mismatch(self, gm10):
        with pytest.raises(ValidationError):
            B.inner_product(np.zeros((2, 10)), np.zeros((3, 10)), gm10)

    def test_batched(self, gm10):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((5, 2, 10))
        out = B.inner_product(a, a, gm10)
        assert out.shape == (5,)
        assert (out > 0).all()
