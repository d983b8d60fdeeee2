"""
Moment-system models.

The optimality conditions of an LP/QP are stored row by row as a bilinear
form in the stacked coefficient vector p and the program variables:

    row_r = sum_p coef_p * (T_theta[r,p,:] . theta + T_lambda[r,p,:] . lambda + T_const[r,p])
            + L_fixed[r,:] . lambda + S_fixed[r,:] . s

so every row is linear in the coefficients (giving the Jacobian G) and, for
fixed theta and coefficients, affine in the nuisance vector (lambda, s).
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..utils.densela import DenseMatrix, DenseVector, as_matrix, as_vector, is_symmetric
from ..utils.errors import DimensionMismatch, InvalidProblem


@dataclass(frozen=True)
class CoefficientBlock:
    name: str
    rows: int
    cols: int
    offset: int

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def index(self, i: int, j: int = 0) -> int:
        """Stacked position of entry (i, j); blocks are stored column-major."""
        return self.offset + j * self.rows + i


@dataclass(frozen=True, eq=False)
class EstimatedCoefficients:
    """
    Point estimates of the stacked coefficients with their asymptotic covariance.

    V_hat is the covariance of sqrt(n) times the estimation error; rows and
    columns of entries that are known constants must be exactly zero.
    """
    point: DenseVector
    V_hat: DenseMatrix
    n: int
    stochastic_mask: Tuple[bool, ...]
    blocks: Tuple[CoefficientBlock, ...]

    def __post_init__(self):
        point = as_vector(self.point)
        V_hat = as_matrix(self.V_hat)
        mask = tuple(bool(flag) for flag in self.stochastic_mask)
        size = point.shape[0]
        if V_hat.shape != (size, size) or len(mask) != size:
            raise DimensionMismatch(
                f"stacked length {size} but V_hat is {V_hat.shape} and mask has {len(mask)} entries"
            )
        if sum(block.size for block in self.blocks) != size:
            raise DimensionMismatch("coefficient blocks do not cover the stacked vector")
        if not is_symmetric(V_hat):
            raise InvalidProblem("V_hat is not symmetric")
        constant = ~np.array(mask, dtype=bool)
        if np.any(V_hat[constant, :] != 0.0) or np.any(V_hat[:, constant] != 0.0):
            raise InvalidProblem("V_hat has nonzero entries for non-stochastic coefficients")
        if self.n < 1:
            raise InvalidProblem(f"sample size must be positive, got {self.n}")
        object.__setattr__(self, 'point', point)
        object.__setattr__(self, 'V_hat', V_hat)
        object.__setattr__(self, 'stochastic_mask', mask)

    @property
    def stochastic_columns(self) -> np.ndarray:
        return np.flatnonzero(np.array(self.stochastic_mask, dtype=bool))

    @property
    def V_stochastic(self) -> DenseMatrix:
        cols = self.stochastic_columns
        return self.V_hat[np.ix_(cols, cols)]

    def block(self, name: str) -> CoefficientBlock:
        for block in self.blocks:
            if block.name == name:
                return block
        raise KeyError(name)

    def block_values(self, name: str) -> DenseMatrix:
        block = self.block(name)
        return self.point[block.offset:block.offset + block.size].reshape((block.rows, block.cols), order='F')

    def with_point(self, point: DenseVector) -> 'EstimatedCoefficients':
        return EstimatedCoefficients(point=point, V_hat=self.V_hat, n=self.n,
                                     stochastic_mask=self.stochastic_mask, blocks=self.blocks)


@dataclass(frozen=True)
class KktRow:
    label: str
    kind: str  # "primal", "eq" or "dual"


@dataclass(frozen=True)
class ComplementarityPair:
    """lambda[lambda_index] complements s[slack_index], or theta[slack_index] when slack_kind == "theta"."""
    lambda_index: int
    slack_kind: str
    slack_index: int

    @property
    def label(self) -> str:
        target = 'θ' if self.slack_kind == 'theta' else 's'
        return f"λ{self.lambda_index}⊥{target}{self.slack_index}"


@dataclass(frozen=True, eq=False)
class KktSystem:
    """Optimality conditions of a program, split into stochastic moments and hard constraints."""
    program: str
    k: int
    n_lambda: int
    n_slack: int
    rows: Tuple[KktRow, ...]
    moment_rows: Tuple[int, ...]
    constraint_rows: Tuple[int, ...]
    complementarity_pairs: Tuple[ComplementarityPair, ...]
    equality_multiplier_indices: Tuple[int, ...]
    stochastic_columns: Tuple[int, ...]
    theta_terms: np.ndarray
    lambda_terms: np.ndarray
    constant_terms: np.ndarray
    lambda_fixed: np.ndarray
    slack_fixed: np.ndarray

    def __post_init__(self):
        for name in ('theta_terms', 'lambda_terms', 'constant_terms', 'lambda_fixed', 'slack_fixed'):
            array = np.array(getattr(self, name), dtype=np.float64)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def df(self) -> int:
        return len(self.moment_rows)

    @property
    def n_nuisance(self) -> int:
        return self.n_lambda + self.n_slack

    @property
    def moment_labels(self) -> Tuple[str, ...]:
        return tuple(self.rows[r].label for r in self.moment_rows)

    @property
    def weight_depends_on_lambda(self) -> bool:
        """True when the moment Jacobian moves with lambda (dual rows with estimated A)."""
        block = self.lambda_terms[np.ix_(self.moment_rows, self.stochastic_columns)]
        return bool(np.any(block != 0.0))

    def check_dimensions(self, theta: DenseVector, lam: DenseVector, slack: DenseVector) -> None:
        if np.shape(theta) != (self.k,) or np.shape(lam) != (self.n_lambda,) or np.shape(slack) != (self.n_slack,):
            raise DimensionMismatch(
                f"expected theta ({self.k},), lambda ({self.n_lambda},), s ({self.n_slack},); "
                f"got {np.shape(theta)}, {np.shape(lam)}, {np.shape(slack)}"
            )

    def coefficient_jacobian(self, theta: DenseVector, lam: DenseVector) -> DenseMatrix:
        """d row / d coef for every optimality row, all stacked columns."""
        return (np.einsum('rpj,j->rp', self.theta_terms, theta)
                + np.einsum('rpl,l->rp', self.lambda_terms, lam)
                + self.constant_terms)

    def row_values(self, point: DenseVector, theta: DenseVector, lam: DenseVector, slack: DenseVector) -> DenseVector:
        return (self.coefficient_jacobian(theta, lam) @ point
                + self.lambda_fixed @ lam + self.slack_fixed @ slack)

    def nuisance_form(self, point: DenseVector, theta: DenseVector) -> Tuple[DenseMatrix, DenseVector]:
        """(M, d) with rows = M @ (lambda, s) + d at fixed theta and coefficients."""
        lambda_part = np.einsum('rpl,p->rl', self.lambda_terms, point) + self.lambda_fixed
        offset = (np.einsum('rpj,p,j->r', self.theta_terms, point, theta)
                  + self.constant_terms @ point)
        return np.hstack([lambda_part, self.slack_fixed]), offset
