"""Matrix helper tests against independent oracles."""

import numpy as np
import pytest

from binno.linalg import (
    as_matrix,
    frobenius_norm,
    matmul,
    nuclear_norm,
    spectral_norm,
    svd,
)

from oracles import jacobi_eigh, matmul_loops, power_iteration_norm


class TestAsMatrix:
    def test_accepts_nested_lists(self):
        a = as_matrix([[1, 2], [3, 4]])
        assert a.shape == (2, 2)
        assert a.dtype == np.float64

    def test_rejects_wrong_ndim(self):
        with pytest.raises(ValueError):
            as_matrix([1.0, 2.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            as_matrix([[1.0, np.nan]])
        with pytest.raises(ValueError):
            as_matrix([[np.inf]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            as_matrix(np.zeros((0, 3)))


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), a), a)

    def test_row_times_column(self):
        out = matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
        np.testing.assert_array_equal(out, [[11.0]])

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((5, 3))
        b = rng.standard_normal((3, 4))
        np.testing.assert_allclose(matmul(a, b), matmul_loops(a, b), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matmul(np.zeros((2, 3)), np.zeros((2, 3)))


class TestFrobeniusNorm:
    def test_three_four_five(self):
        assert frobenius_norm(np.array([[3.0, 4.0]])) == 5.0

    def test_zero(self):
        assert frobenius_norm(np.zeros((4, 7))) == 0.0

    def test_trace_identity(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((10, 10))
        expected = np.sqrt(np.trace(a.T @ a))
        np.testing.assert_allclose(frobenius_norm(a), expected, atol=1e-12)


class TestSvd:
    def test_diagonal(self):
        f = svd(np.diag([5.0, 2.0]))
        np.testing.assert_allclose(f.sigma, [5.0, 2.0])
        np.testing.assert_allclose(f.u, np.eye(2), atol=1e-15)
        np.testing.assert_allclose(f.vt, np.eye(2), atol=1e-15)

    def test_rank_one(self):
        rng = np.random.default_rng(2)
        u = rng.standard_normal(6)
        v = rng.standard_normal(4)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        f = svd(np.outer(u, v))
        np.testing.assert_allclose(f.sigma[0], 1.0, atol=1e-12)
        np.testing.assert_allclose(f.sigma[1:], 0.0, atol=1e-12)

    def test_singular_values_match_jacobi_eigensolver(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((8, 6))
        eigvals, _ = jacobi_eigh(a.T @ a)
        expected = np.sqrt(np.maximum(eigvals, 0.0))
        np.testing.assert_allclose(svd(a).sigma, expected, atol=1e-8)

    def test_reconstruction_and_orthonormality_batch(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            rows = int(rng.integers(1, 51))
            cols = int(rng.integers(1, 51))
            a = rng.standard_normal((rows, cols)) * rng.uniform(0.1, 10)
            f = svd(a)
            k = min(rows, cols)
            assert np.all(np.diff(f.sigma) <= 0)
            assert np.all(f.sigma >= 0)
            assert frobenius_norm(f.u.T @ f.u - np.eye(k)) <= 1e-10 * k
            assert frobenius_norm(f.vt @ f.vt.T - np.eye(k)) <= 1e-10 * k
            err = frobenius_norm(f.reconstruct() - a)
            assert err <= 1e-8 * max(1.0, frobenius_norm(a))

    def test_sign_convention(self):
        rng = np.random.default_rng(5)
        f = svd(rng.standard_normal((7, 5)))
        for j in range(f.u.shape[1]):
            col = f.u[:, j]
            nonzero = np.nonzero(col)[0]
            assert col[nonzero[0]] >= 0

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((9, 9))
        f1, f2 = svd(a), svd(a)
        np.testing.assert_array_equal(f1.u, f2.u)
        np.testing.assert_array_equal(f1.sigma, f2.sigma)
        np.testing.assert_array_equal(f1.vt, f2.vt)


class TestSpectralNorm:
    def test_identity(self):
        assert spectral_norm(np.eye(3)) == pytest.approx(1.0)

    def test_signed_diagonal(self):
        assert spectral_norm(np.diag([2.0, -7.0])) == pytest.approx(7.0)

    def test_matches_power_iteration(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((6, 6))
        estimate = power_iteration_norm(a)
        assert spectral_norm(a) == pytest.approx(estimate, rel=1e-6)

    def test_agrees_with_svd_factor(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((5, 9))
        assert abs(spectral_norm(a) - svd(a).sigma[0]) <= 1e-10

    def test_bounded_by_frobenius(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            a = rng.standard_normal((4, 6))
            assert spectral_norm(a) <= frobenius_norm(a) + 1e-12


class TestNormInequalities:
    def test_product_norm_submultiplicative(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            a = rng.standard_normal((4, 5))
            b = rng.standard_normal((5, 3))
            lhs = frobenius_norm(a @ b)
            rhs = spectral_norm(a) * frobenius_norm(b)
            assert lhs <= rhs * (1 + 1e-12)


def test_nuclear_norm_matches_singular_value_sum():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((6, 4))
    assert nuclear_norm(a) == pytest.approx(float(np.sum(svd(a).sigma)), abs=1e-12)
