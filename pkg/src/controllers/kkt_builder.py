"""
Builds the stochastic moment system from LP/QP optimality conditions.

LP rows:  A theta + s - b = 0        (primal, one per constraint)
          A'lambda - mu - c = 0      (dual; mu only when theta >= 0)
QP rows:  A_ineq theta - b_ineq - s = 0,  A_eq theta - b_eq = 0
          A_ineq'lambda + A_eq'lambda_eq - c - Q theta = 0

Rows touching an estimated coefficient become moments; the rest are
enforced exactly while profiling. Deterministic sign rows e_j'theta >= 0 use
theta_j itself as the slack, so they add a complementarity pair but no row.
"""

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.moments import (CoefficientBlock, ComplementarityPair, EstimatedCoefficients,
                              KktRow, KktSystem)
from ..models.programs import LpProblem, LpSolution, QpProblem, QpSolution
from ..utils.densela import DenseMatrix, DenseVector, vec
from ..utils.errors import DimensionMismatch, EmptyMoments


def _layout(shapes: Sequence[Tuple[str, int, int]]) -> Tuple[CoefficientBlock, ...]:
    blocks, offset = [], 0
    for name, rows, cols in shapes:
        blocks.append(CoefficientBlock(name=name, rows=rows, cols=cols, offset=offset))
        offset += rows * cols
    return tuple(blocks)


def lp_layout(p: LpProblem) -> Tuple[CoefficientBlock, ...]:
    return _layout([('A', p.m, p.k), ('b', p.m, 1), ('c', p.k, 1)])


def qp_layout(p: QpProblem) -> Tuple[CoefficientBlock, ...]:
    return _layout([('A_ineq', p.m_ineq, p.k), ('b_ineq', p.m_ineq, 1),
                    ('A_eq', p.m_eq, p.k), ('b_eq', p.m_eq, 1),
                    ('c', p.k, 1), ('Q', p.k, p.k)])


def stacked_mask(blocks: Tuple[CoefficientBlock, ...], stochastic: Union[Sequence[str], Sequence[bool]]) -> np.ndarray:
    size = sum(block.size for block in blocks)
    entries = list(stochastic)
    if entries and all(isinstance(entry, str) for entry in entries):
        mask = np.zeros(size, dtype=bool)
        names = {block.name: block for block in blocks}
        for name in entries:
            if name not in names:
                raise DimensionMismatch(f"unknown coefficient block '{name}'")
            block = names[name]
            mask[block.offset:block.offset + block.size] = True
        return mask
    mask = np.array(entries, dtype=bool)
    if mask.shape != (size,):
        raise DimensionMismatch(f"stochastic mask has {mask.size} entries, stacked vector has {size}")
    return mask


def embed_covariance(mask: np.ndarray, V_stochastic: DenseMatrix) -> DenseMatrix:
    """Place the covariance of the stochastic entries into the full stacked layout."""
    cols = np.flatnonzero(mask)
    V_stochastic = np.atleast_2d(np.asarray(V_stochastic, dtype=np.float64))
    if V_stochastic.shape != (cols.size, cols.size):
        raise DimensionMismatch(f"covariance is {V_stochastic.shape} for {cols.size} stochastic entries")
    full = np.zeros((mask.size, mask.size))
    full[np.ix_(cols, cols)] = V_stochastic
    return full


def lp_coefficients(p: LpProblem, stochastic: Union[Sequence[str], Sequence[bool]],
                    V_stochastic: DenseMatrix, n: int) -> EstimatedCoefficients:
    """Stack (vec(A), b, c) from the problem's point estimates."""
    blocks = lp_layout(p)
    mask = stacked_mask(blocks, stochastic)
    point = np.concatenate([vec(p.A), p.b, p.c])
    return EstimatedCoefficients(point=point, V_hat=embed_covariance(mask, V_stochastic), n=n,
                                 stochastic_mask=tuple(mask), blocks=blocks)


def qp_coefficients(p: QpProblem, stochastic: Union[Sequence[str], Sequence[bool]],
                    V_stochastic: DenseMatrix, n: int) -> EstimatedCoefficients:
    """Stack (vec(A_ineq), b_ineq, vec(A_eq), b_eq, c, vec(Q)) from the problem's point estimates."""
    blocks = qp_layout(p)
    mask = stacked_mask(blocks, stochastic)
    point = np.concatenate([vec(p.A_ineq).reshape(-1), p.b_ineq, vec(p.A_eq).reshape(-1),
                            p.b_eq, p.c, vec(p.Q)])
    return EstimatedCoefficients(point=point, V_hat=embed_covariance(mask, V_stochastic), n=n,
                                 stochastic_mask=tuple(mask), blocks=blocks)


class _RowBuilder:
    """Accumulates rows of the bilinear moment representation."""

    def __init__(self, n_coef: int, k: int, n_lambda: int, n_slack: int):
        self.n_coef, self.k, self.n_lambda, self.n_slack = n_coef, k, n_lambda, n_slack
        self.rows: List[KktRow] = []
        self.theta, self.lam, self.const, self.lam_fixed, self.slack_fixed = [], [], [], [], []

    def add(self, label: str, kind: str) -> int:
        self.rows.append(KktRow(label=label, kind=kind))
        self.theta.append(np.zeros((self.n_coef, self.k)))
        self.lam.append(np.zeros((self.n_coef, self.n_lambda)))
        self.const.append(np.zeros(self.n_coef))
        self.lam_fixed.append(np.zeros(self.n_lambda))
        self.slack_fixed.append(np.zeros(self.n_slack))
        return len(self.rows) - 1

    def finish(self, program: str, mask: np.ndarray, pairs, equality_multipliers) -> KktSystem:
        theta_terms = np.array(self.theta).reshape(len(self.rows), self.n_coef, self.k)
        lambda_terms = np.array(self.lam).reshape(len(self.rows), self.n_coef, self.n_lambda)
        constant_terms = np.array(self.const).reshape(len(self.rows), self.n_coef)
        stochastic = np.flatnonzero(mask)
        touches = (np.any(theta_terms[:, stochastic, :] != 0.0, axis=(1, 2))
                   | np.any(lambda_terms[:, stochastic, :] != 0.0, axis=(1, 2))
                   | np.any(constant_terms[:, stochastic] != 0.0, axis=1))
        moment_rows = tuple(int(r) for r in np.flatnonzero(touches))
        if not moment_rows:
            raise EmptyMoments("no optimality condition involves an estimated coefficient")
        return KktSystem(
            program=program,
            k=self.k,
            n_lambda=self.n_lambda,
            n_slack=self.n_slack,
            rows=tuple(self.rows),
            moment_rows=moment_rows,
            constraint_rows=tuple(int(r) for r in np.flatnonzero(~touches)),
            complementarity_pairs=tuple(pairs),
            equality_multiplier_indices=tuple(equality_multipliers),
            stochastic_columns=tuple(int(c) for c in stochastic),
            theta_terms=theta_terms,
            lambda_terms=lambda_terms,
            constant_terms=constant_terms,
            lambda_fixed=np.array(self.lam_fixed).reshape(len(self.rows), self.n_lambda),
            slack_fixed=np.array(self.slack_fixed).reshape(len(self.rows), self.n_slack),
        )


def _check_layout(est: EstimatedCoefficients, blocks: Tuple[CoefficientBlock, ...]) -> None:
    if tuple(est.blocks) != tuple(blocks):
        raise DimensionMismatch("estimated coefficients do not match the problem's stacked layout")


def build_lp_system(p: LpProblem, est: EstimatedCoefficients) -> KktSystem:
    """
    Moment system for max c'theta s.t. A theta <= b.

    Raises:
        EmptyMoments: no row involves a stochastic coefficient
    """
    blocks = lp_layout(p)
    _check_layout(est, blocks)
    A, b, c = blocks
    m, k = p.m, p.k
    n_lambda = m + (k if p.nonneg else 0)
    builder = _RowBuilder(est.point.size, k, n_lambda, m)

    for i in range(m):
        r = builder.add(f"primal[{i}]", "primal")
        for j in range(k):
            builder.theta[r][A.index(i, j), j] = 1.0
        builder.const[r][b.index(i)] = -1.0
        builder.slack_fixed[r][i] = 1.0
    for j in range(k):
        r = builder.add(f"dual[{j}]", "dual")
        for i in range(m):
            builder.lam[r][A.index(i, j), i] = 1.0
        builder.const[r][c.index(j)] = -1.0
        if p.nonneg:
            builder.lam_fixed[r][m + j] = -1.0

    pairs = [ComplementarityPair(i, 's', i) for i in range(m)]
    if p.nonneg:
        pairs += [ComplementarityPair(m + j, 'theta', j) for j in range(k)]
    return builder.finish('lp', np.array(est.stochastic_mask), pairs, ())


def _sign_row_target(p: QpProblem, est: EstimatedCoefficients, blocks, i: int) -> Optional[int]:
    """Column j when inequality row i is the deterministic bound theta_j >= 0."""
    A_in, b_in = blocks[0], blocks[1]
    row = np.asarray(p.A_ineq[i])
    nonzero = np.flatnonzero(row)
    if nonzero.size != 1 or row[nonzero[0]] != 1.0 or p.b_ineq[i] != 0.0:
        return None
    mask = est.stochastic_mask
    if mask[b_in.index(i)] or any(mask[A_in.index(i, j)] for j in range(p.k)):
        return None
    return int(nonzero[0])


def build_qp_system(p: QpProblem, est: EstimatedCoefficients) -> KktSystem:
    """
    Moment system for min c'theta + 1/2 theta'Q theta s.t. A_ineq theta >= b_ineq, A_eq theta = b_eq.

    Equality multipliers carry no sign restriction and no complementarity.

    Raises:
        EmptyMoments: no row involves a stochastic coefficient
    """
    blocks = qp_layout(p)
    _check_layout(est, blocks)
    A_in, b_in, A_eq, b_eq, c, Q = blocks
    k, m_in, m_eq = p.k, p.m_ineq, p.m_eq

    sign_targets = {i: _sign_row_target(p, est, blocks, i) for i in range(m_in)}
    slack_of = {}
    for i in range(m_in):
        if sign_targets[i] is None:
            slack_of[i] = len(slack_of)
    builder = _RowBuilder(est.point.size, k, m_in + m_eq, len(slack_of))

    for i, s in slack_of.items():
        r = builder.add(f"primal[{i}]", "primal")
        for j in range(k):
            builder.theta[r][A_in.index(i, j), j] = 1.0
        builder.const[r][b_in.index(i)] = -1.0
        builder.slack_fixed[r][s] = -1.0
    for e in range(m_eq):
        r = builder.add(f"eq[{e}]", "eq")
        for j in range(k):
            builder.theta[r][A_eq.index(e, j), j] = 1.0
        builder.const[r][b_eq.index(e)] = -1.0
    for j in range(k):
        r = builder.add(f"dual[{j}]", "dual")
        for i in range(m_in):
            builder.lam[r][A_in.index(i, j), i] = 1.0
        for e in range(m_eq):
            builder.lam[r][A_eq.index(e, j), m_in + e] = 1.0
        builder.const[r][c.index(j)] = -1.0
        for l in range(k):
            builder.theta[r][Q.index(j, l), l] = -1.0

    pairs = []
    for i in range(m_in):
        if sign_targets[i] is None:
            pairs.append(ComplementarityPair(i, 's', slack_of[i]))
        else:
            pairs.append(ComplementarityPair(i, 'theta', sign_targets[i]))
    equality_multipliers = tuple(range(m_in, m_in + m_eq))
    return builder.finish('qp', np.array(est.stochastic_mask), pairs, equality_multipliers)


def eval_moments(sys: KktSystem, est: EstimatedCoefficients, theta: DenseVector,
                 lam: DenseVector, slack: DenseVector) -> Tuple[DenseVector, DenseMatrix]:
    """
    Moment vector g and its Jacobian G with respect to the stochastic coefficients.

    Raises:
        DimensionMismatch: parameter shapes do not conform to the system
    """
    theta, lam, slack = (np.asarray(v, dtype=np.float64) for v in (theta, lam, slack))
    sys.check_dimensions(theta, lam, slack)
    if est.point.shape[0] != sys.theta_terms.shape[1]:
        raise DimensionMismatch("coefficient vector does not match the system")
    values = sys.row_values(est.point, theta, lam, slack)
    jacobian = sys.coefficient_jacobian(theta, lam)
    moment_rows = list(sys.moment_rows)
    return values[moment_rows], jacobian[np.ix_(moment_rows, list(sys.stochastic_columns))]


def solution_nuisance(sys: KktSystem, solution: Union[LpSolution, QpSolution]) -> Tuple[DenseVector, DenseVector]:
    """Map a solver's multipliers and slacks onto the system's (lambda, s) layout."""
    if isinstance(solution, LpSolution):
        lam = np.concatenate([solution.lambda_, solution.lambda_nonneg])
        slack = np.asarray(solution.slack)
    else:
        lam = np.concatenate([solution.lambda_ineq, solution.lambda_eq])
        slack = np.zeros(sys.n_slack)
        for pair in sys.complementarity_pairs:
            if pair.slack_kind == 's':
                slack[pair.slack_index] = solution.slack[pair.lambda_index]
    if lam.shape != (sys.n_lambda,) or slack.shape != (sys.n_slack,):
        raise DimensionMismatch("solution does not match the system layout")
    return lam, slack
