import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from src.utils.densela import as_matrix, kron, robust_sym_inv, solve, sym_pinv, unvec, vec
from src.utils.errors import DimensionMismatch, NotPositiveDefinite, SingularMatrix

finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


def matrices(rows, cols):
    return arrays(np.float64, (rows, cols), elements=finite)


class TestVec:
    def test_column_major_order(self):
        assert vec([[1, 2], [3, 4]]).tolist() == [1, 3, 2, 4]

    @given(st.integers(1, 4), st.integers(1, 4), st.data())
    def test_unvec_inverts_vec(self, rows, cols, data):
        m = data.draw(matrices(rows, cols))
        np.testing.assert_array_equal(unvec(vec(m), rows, cols), m)

    @given(st.data())
    def test_kron_vec_identity(self, data):
        """vec(W X Z) = (Z' kron W) vec(X)."""
        W = data.draw(matrices(2, 3))
        X = data.draw(matrices(3, 2))
        Z = data.draw(matrices(2, 4))
        lhs = vec(W @ X @ Z)
        rhs = kron(Z.T, W) @ vec(X)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(lhs).max()))

    def test_unvec_rejects_wrong_size(self):
        with pytest.raises(DimensionMismatch):
            unvec([1.0, 2.0, 3.0], 2, 2)


class TestSolve:
    def test_residual_is_small(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            M = rng.normal(size=(4, 4)) + 4 * np.eye(4)
            y = rng.normal(size=4)
            assert np.linalg.norm(M @ solve(M, y) - y, np.inf) <= 1e-10 * np.linalg.norm(M, np.inf)

    def test_singular_matrix(self):
        with pytest.raises(SingularMatrix):
            solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0])

    def test_zero_matrix(self):
        with pytest.raises(SingularMatrix):
            solve(np.zeros((2, 2)), [0.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve(np.eye(2), [1.0, 2.0, 3.0])


class TestSymmetricInverse:
    def test_inverse_of_spd(self):
        M = np.array([[2.0, 0.5], [0.5, 1.0]])
        np.testing.assert_allclose(sym_pinv(M) @ M, np.eye(2), atol=1e-12)

    def test_rejects_asymmetric(self):
        with pytest.raises(DimensionMismatch):
            sym_pinv([[1.0, 2.0], [0.0, 1.0]])

    def test_indefinite_fails(self):
        with pytest.raises(NotPositiveDefinite):
            sym_pinv([[1.0, 0.0], [0.0, -1.0]])

    def test_singular_gets_ridge(self):
        M = np.array([[1.0, 1.0], [1.0, 1.0]])
        inverse = robust_sym_inv(M)
        assert np.all(np.isfinite(inverse))

    def test_zero_matrix_uses_floor_ridge(self):
        np.testing.assert_allclose(robust_sym_inv(np.zeros((2, 2))), 1e12 * np.eye(2), rtol=1e-9)


def test_as_matrix_is_read_only():
    m = as_matrix([[1.0]])
    with pytest.raises(ValueError):
        m[0, 0] = 2.0
