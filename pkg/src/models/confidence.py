"""
Profiled statistics and confidence-set models.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..utils.densela import DenseMatrix, DenseVector, as_vector
from ..utils.errors import DimensionMismatch, InvalidProblem
from ..utils.stats import chi2_quantile

CONSTRAINT_TOL = 1e-9


@dataclass(frozen=True)
class ProfileResult:
    """Minimum of n*Q_n(theta, lambda, s) over the complementarity-constrained nuisance."""
    statistic: float
    lambda_star: DenseVector
    s_star: DenseVector
    piece: Tuple[str, ...]  # per pair: "L" fixes lambda at 0, "S" fixes the slack side at 0
    iterations: int
    converged: bool = True


@dataclass(frozen=True)
class ThetaConstraints:
    """
    Linear restrictions on theta enforced by the search lattice.

    Attributes:
        nonneg: coordinates required to be >= 0
        eq_A, eq_b: rows of eq_A @ theta == eq_b
        ineq_A, ineq_b: rows of ineq_A @ theta >= ineq_b
    """
    k: int
    nonneg: Tuple[int, ...] = ()
    eq_A: Optional[DenseMatrix] = None
    eq_b: Optional[DenseVector] = None
    ineq_A: Optional[DenseMatrix] = None
    ineq_b: Optional[DenseVector] = None

    def __post_init__(self):
        for A_name, b_name in (('eq_A', 'eq_b'), ('ineq_A', 'ineq_b')):
            A = getattr(self, A_name)
            b = getattr(self, b_name)
            A = np.zeros((0, self.k)) if A is None else np.atleast_2d(np.asarray(A, dtype=np.float64))
            b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=np.float64))
            if A.size == 0:
                A = A.reshape(0, self.k)
            if A.shape[1] != self.k or A.shape[0] != b.shape[0]:
                raise DimensionMismatch(f"{A_name} is {A.shape} with {b.shape[0]} right-hand sides for k={self.k}")
            A.setflags(write=False)
            b.setflags(write=False)
            object.__setattr__(self, A_name, A)
            object.__setattr__(self, b_name, b)
        nonneg = tuple(sorted(set(int(j) for j in self.nonneg)))
        if any(j < 0 or j >= self.k for j in nonneg):
            raise DimensionMismatch(f"nonneg coordinates {nonneg} out of range for k={self.k}")
        object.__setattr__(self, 'nonneg', nonneg)

    def with_nonneg(self, coordinates) -> 'ThetaConstraints':
        return ThetaConstraints(k=self.k, nonneg=tuple(self.nonneg) + tuple(coordinates),
                                eq_A=self.eq_A, eq_b=self.eq_b, ineq_A=self.ineq_A, ineq_b=self.ineq_b)

    def satisfied(self, theta: DenseVector, tol: float = CONSTRAINT_TOL) -> bool:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.k,):
            return False
        if self.nonneg and np.any(theta[list(self.nonneg)] < -tol):
            return False
        if self.eq_A.shape[0] and np.any(np.abs(self.eq_A @ theta - self.eq_b) > tol):
            return False
        if self.ineq_A.shape[0] and np.any(self.ineq_A @ theta - self.ineq_b < -tol):
            return False
        return True


@dataclass(frozen=True)
class ConfidenceSpec:
    alpha: float
    df: int
    theta_box: Tuple[Tuple[float, float], ...]
    grid_step: float
    constraints: Optional[ThetaConstraints] = None
    threads: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidProblem(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.df < 1:
            raise InvalidProblem(f"degrees of freedom must be positive, got {self.df}")
        if not self.grid_step > 0.0:
            raise InvalidProblem(f"grid_step must be positive, got {self.grid_step}")
        box = tuple((float(lo), float(hi)) for lo, hi in self.theta_box)
        for j, (lo, hi) in enumerate(box):
            if not lo < hi:
                raise InvalidProblem(f"theta_box[{j}]: lower bound {lo} is not below upper bound {hi}")
        object.__setattr__(self, 'theta_box', box)
        if self.constraints is None:
            object.__setattr__(self, 'constraints', ThetaConstraints(k=len(box)))
        elif self.constraints.k != len(box):
            raise DimensionMismatch(f"constraints are for k={self.constraints.k}, box has {len(box)} coordinates")

    @property
    def k(self) -> int:
        return len(self.theta_box)

    @property
    def critical_value(self) -> float:
        return chi2_quantile(self.df, 1.0 - self.alpha)


@dataclass(frozen=True)
class GridPoint:
    theta: DenseVector
    statistic: float
    accepted: bool
    index: Tuple[int, ...]  # lattice position in the free coordinates

    def __post_init__(self):
        object.__setattr__(self, 'theta', as_vector(self.theta))


@dataclass(frozen=True)
class ConfidenceSet:
    points: Tuple[GridPoint, ...]
    critical_value: float
    alpha: float
    df: int
    projection: Tuple[Tuple[float, float], ...] = field(default=())

    @property
    def accepted(self) -> Tuple[Tuple[DenseVector, float], ...]:
        return tuple((p.theta, p.statistic) for p in self.points if p.accepted)

    @property
    def is_empty(self) -> bool:
        return not any(p.accepted for p in self.points)

    @property
    def min_statistic(self) -> float:
        return min((p.statistic for p in self.points), default=float('inf'))
