"""
Linear and quadratic program models.

LP:  max c'theta  s.t.  A theta <= b  (optionally theta >= 0)
QP:  min c'theta + 1/2 theta'Q theta  s.t.  A_ineq theta >= b_ineq,  A_eq theta = b_eq
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ..utils.densela import DenseMatrix, DenseVector, as_matrix, as_vector
from ..utils.errors import DimensionMismatch, InfeasibleProgram, InvalidProblem, UnboundedProgram

QP_SYMMETRY_TOL = 1e-10
QP_PSD_SHIFT = 1e-8


class SolveStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


def _require_optimal(status: SolveStatus, what: str) -> None:
    if status is SolveStatus.INFEASIBLE:
        raise InfeasibleProgram(f"{what} is infeasible")
    if status is SolveStatus.UNBOUNDED:
        raise UnboundedProgram(f"{what} is unbounded")


def _constraint_block(A, b, k: int, name: str) -> Tuple[DenseMatrix, DenseVector]:
    if A is None:
        A = np.zeros((0, k))
    matrix = as_matrix(np.asarray(A, dtype=np.float64).reshape(-1, k) if np.size(A) == 0 else A,
                       allow_empty=True)
    vector = as_vector(np.zeros(0) if b is None else b)
    if matrix.shape[1] != k or matrix.shape[0] != vector.shape[0]:
        raise DimensionMismatch(
            f"{name}: matrix {matrix.shape} and vector ({vector.shape[0]},) do not conform with k={k}"
        )
    return matrix, vector


@dataclass(frozen=True)
class LpProblem:
    A: DenseMatrix
    b: DenseVector
    c: DenseVector
    nonneg: bool = False

    def __post_init__(self):
        A = as_matrix(self.A)
        b = as_vector(self.b)
        c = as_vector(self.c)
        if A.shape != (b.shape[0], c.shape[0]):
            raise DimensionMismatch(f"A is {A.shape} but b has {b.shape[0]} and c has {c.shape[0]} entries")
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'c', c)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class LpSolution:
    status: SolveStatus
    theta: DenseVector
    lambda_: DenseVector
    slack: DenseVector
    objective: float
    lambda_nonneg: DenseVector = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    def require_optimal(self) -> 'LpSolution':
        _require_optimal(self.status, "linear program")
        return self


@dataclass(frozen=True)
class QpProblem:
    Q: DenseMatrix
    c: DenseVector
    A_ineq: Optional[DenseMatrix] = None
    b_ineq: Optional[DenseVector] = None
    A_eq: Optional[DenseMatrix] = None
    b_eq: Optional[DenseVector] = None

    def __post_init__(self):
        Q = as_matrix(self.Q)
        c = as_vector(self.c)
        k = c.shape[0]
        if Q.shape != (k, k):
            raise DimensionMismatch(f"Q is {Q.shape} but c has {k} entries")
        if np.max(np.abs(Q - Q.T)) > QP_SYMMETRY_TOL:
            raise InvalidProblem("Q is not symmetric")
        try:
            np.linalg.cholesky(Q + QP_PSD_SHIFT * np.eye(k))
        except np.linalg.LinAlgError as exc:
            raise InvalidProblem("Q is not positive semi-definite") from exc
        A_ineq, b_ineq = _constraint_block(self.A_ineq, self.b_ineq, k, "inequality constraints")
        A_eq, b_eq = _constraint_block(self.A_eq, self.b_eq, k, "equality constraints")
        object.__setattr__(self, 'Q', Q)
        object.__setattr__(self, 'c', c)
        object.__setattr__(self, 'A_ineq', A_ineq)
        object.__setattr__(self, 'b_ineq', b_ineq)
        object.__setattr__(self, 'A_eq', A_eq)
        object.__setattr__(self, 'b_eq', b_eq)

    @property
    def k(self) -> int:
        return self.c.shape[0]

    @property
    def m_ineq(self) -> int:
        return self.A_ineq.shape[0]

    @property
    def m_eq(self) -> int:
        return self.A_eq.shape[0]

    def objective(self, theta: DenseVector) -> float:
        return float(self.c @ theta + 0.5 * theta @ self.Q @ theta)


@dataclass(frozen=True)
class QpSolution:
    status: SolveStatus
    theta: DenseVector
    lambda_ineq: DenseVector
    lambda_eq: DenseVector
    slack: DenseVector
    objective: float
    iterations: int = 0
    trace: Tuple[float, ...] = ()

    def require_optimal(self) -> 'QpSolution':
        _require_optimal(self.status, "quadratic program")
        return self
