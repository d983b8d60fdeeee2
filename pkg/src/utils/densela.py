"""
Dense linear algebra kernel.

Matrices and vectors are float64 numpy arrays. Everything returned here is
a fresh, read-only array so problem data can be shared across worker
threads without copying.
"""

import warnings
from typing import Union, Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite, SingularMatrix

DenseMatrix = npt.NDArray[np.float64]
DenseVector = npt.NDArray[np.float64]
ArrayLike = Union[npt.ArrayLike, Sequence[float]]

SINGULAR_PIVOT_RTOL = 1e-12
SYMMETRY_TOL = 1e-8
RIDGE_SCALE = 1e-10
ZERO_TRACE_RIDGE = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def as_matrix(values: ArrayLike, allow_empty: bool = False) -> DenseMatrix:
    """Validate and copy into a read-only 2-D float64 array."""
    matrix = np.array(values, dtype=np.float64)
    if matrix.ndim == 1 and matrix.size == 0 and allow_empty:
        matrix = matrix.reshape(0, 0)
    if matrix.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {matrix.shape}")
    if not allow_empty and (matrix.shape[0] < 1 or matrix.shape[1] < 1):
        raise DimensionMismatch(f"matrix must have at least one row and column, got {matrix.shape}")
    return _frozen(matrix)


def as_vector(values: ArrayLike) -> DenseVector:
    """Validate and copy into a read-only 1-D float64 array."""
    vector = np.atleast_1d(np.array(values, dtype=np.float64))
    if vector.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {vector.shape}")
    return _frozen(vector)


def vec(matrix: ArrayLike) -> DenseVector:
    """Stack the columns of a matrix; entry (i, j) lands at j*rows + i."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim == 1:
        return _frozen(m.copy())
    return _frozen(m.reshape(-1, order='F').copy())


def unvec(vector: ArrayLike, rows: int, cols: int) -> DenseMatrix:
    """Inverse of vec for a rows x cols matrix."""
    v = np.asarray(vector, dtype=np.float64)
    if v.size != rows * cols:
        raise DimensionMismatch(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return _frozen(v.reshape((rows, cols), order='F').copy())


def kron(w: ArrayLike, x: ArrayLike) -> DenseMatrix:
    """Kronecker product; block (i, j) equals w_ij * X."""
    return _frozen(np.kron(np.atleast_2d(np.asarray(w, dtype=np.float64)),
                           np.atleast_2d(np.asarray(x, dtype=np.float64))))


def solve(matrix: ArrayLike, rhs: ArrayLike) -> DenseVector:
    """
    Solve M x = y with a partial-pivot LU factorization.

    Raises:
        DimensionMismatch: M is not square or y does not conform
        SingularMatrix: a pivot is below 1e-12 * ||M||_inf
    """
    m = np.asarray(matrix, dtype=np.float64)
    y = np.asarray(rhs, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"solve needs a square matrix, got {m.shape}")
    if y.shape != (m.shape[0],):
        raise DimensionMismatch(f"right-hand side has shape {y.shape}, expected ({m.shape[0]},)")

    norm = np.linalg.norm(m, np.inf)
    if norm == 0.0:
        raise SingularMatrix("matrix is identically zero")
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
    smallest_pivot = np.min(np.abs(np.diag(lu)))
    if smallest_pivot < SINGULAR_PIVOT_RTOL * norm:
        raise SingularMatrix(f"pivot {smallest_pivot:.3e} below threshold for ||M||_inf={norm:.3e}")
    return _frozen(scipy.linalg.lu_solve((lu, piv), y))


def is_symmetric(matrix: ArrayLike, tol: float = SYMMETRY_TOL) -> bool:
    m = np.asarray(matrix, dtype=np.float64)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.all(np.abs(m - m.T) <= tol))


def sym_pinv(matrix: ArrayLike, ridge: float = 0.0) -> DenseMatrix:
    """
    Inverse of (M + ridge*I) via Cholesky.

    Raises:
        DimensionMismatch: M is not symmetric within 1e-8
        NotPositiveDefinite: the Cholesky factorization fails
    """
    m = np.asarray(matrix, dtype=np.float64)
    if not is_symmetric(m):
        raise DimensionMismatch("sym_pinv needs a symmetric matrix")
    dim = m.shape[0]
    shifted = 0.5 * (m + m.T) + ridge * np.eye(dim)
    try:
        factor = scipy.linalg.cho_factor(shifted, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky failed with ridge={ridge:.3e}") from exc
    inverse = scipy.linalg.cho_solve(factor, np.eye(dim))
    return _frozen(0.5 * (inverse + inverse.T))


def robust_sym_inv(matrix: ArrayLike) -> DenseMatrix:
    """
    Weight-matrix inverse with the ridge retry policy.

    Tries ridge 0, then 1e-10 * trace/dim. A matrix with zero trace (no
    sampling noise at all) gets the floor ridge 1e-12, which turns the
    statistic into a very steep penalty on any nonzero moment.
    """
    m = np.asarray(matrix, dtype=np.float64)
    try:
        return sym_pinv(m, 0.0)
    except NotPositiveDefinite:
        pass
    dim = m.shape[0]
    trace = float(np.trace(m))
    ridge = RIDGE_SCALE * trace / dim if trace > 0 else ZERO_TRACE_RIDGE
    return sym_pinv(m, ridge)
