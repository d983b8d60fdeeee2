"""
Two-phase primal simplex for small dense LPs.

    max c'theta  s.t.  A theta <= b   (theta >= 0 when nonneg is set)

theta is free internally (split into theta+ - theta-); the sign restriction
is appended as -I rows so its multipliers come out of the final basis like
any other dual. Entering and leaving variables follow Bland's rule.
"""

from itertools import combinations
from typing import List, Tuple

import numpy as np

from ..models.programs import LpProblem, LpSolution, SolveStatus
from ..utils.densela import DenseMatrix, DenseVector, solve
from ..utils.errors import DimensionGuard, MaxIterations, SingularMatrix
from ..utils.logger import InferenceLogger

PIVOT_TOL = 1e-11
REDUCED_COST_TOL = 1e-10
PHASE1_TOL = 1e-9
MAX_PIVOTS = 20000
VERTEX_GUARD = 20


def _with_sign_rows(p: LpProblem) -> Tuple[DenseMatrix, DenseVector]:
    if not p.nonneg:
        return np.asarray(p.A), np.asarray(p.b)
    return np.vstack([p.A, -np.eye(p.k)]), np.concatenate([p.b, np.zeros(p.k)])


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    column = tableau[:, col].copy()
    column[row] = 0.0
    tableau -= np.outer(column, tableau[row])


def _simplex(tableau: np.ndarray, basis: List[int], objective: np.ndarray, n_allowed: int) -> Tuple[str, int]:
    """Maximize objective'z over the tableau in place; returns (outcome, pivots)."""
    for pivots in range(MAX_PIVOTS):
        reduced = objective[:n_allowed] - objective[basis] @ tableau[:, :n_allowed]
        entering = np.flatnonzero(reduced > REDUCED_COST_TOL)
        if entering.size == 0:
            return "optimal", pivots
        col = int(entering[0])
        column = tableau[:, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return "unbounded", pivots
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tableau, row, col)
        basis[row] = col
    raise MaxIterations(f"simplex exceeded {MAX_PIVOTS} pivots")


def solve_lp(p: LpProblem) -> LpSolution:
    """
    Solve the LP and recover primal solution, duals and slacks.

    Duals come from the final basis (A_B' y = c_B) and satisfy
    lambda >= 0, A'lambda = c (with the sign rows included) and
    c'theta = b'lambda at optimality.
    """
    logger = InferenceLogger()
    A_full, b_full = _with_sign_rows(p)
    n_rows, k = A_full.shape

    sign = np.where(b_full < 0, -1.0, 1.0)
    art_rows = np.flatnonzero(b_full < 0)
    n_struct = 2 * k + n_rows
    n_cols = n_struct + art_rows.size

    original = np.zeros((n_rows, n_cols))
    original[:, :k] = sign[:, None] * A_full
    original[:, k:2 * k] = -sign[:, None] * A_full
    original[:, 2 * k:n_struct] = np.diag(sign)
    for a, row in enumerate(art_rows):
        original[row, n_struct + a] = 1.0

    tableau = np.hstack([original, (sign * b_full).reshape(-1, 1)])
    basis = [2 * k + i for i in range(n_rows)]
    for a, row in enumerate(art_rows):
        basis[row] = n_struct + a

    total_pivots = 0
    if art_rows.size:
        phase1 = np.zeros(n_cols)
        phase1[n_struct:] = -1.0
        _, pivots = _simplex(tableau, basis, phase1, n_cols)
        total_pivots += pivots
        if phase1[basis] @ tableau[:, -1] < -PHASE1_TOL:
            logger.log_solver_event("lp", SolveStatus.INFEASIBLE.value, f"{total_pivots} pivots")
            return _non_optimal(SolveStatus.INFEASIBLE, p, total_pivots)
        for row in range(n_rows):
            if basis[row] >= n_struct:
                candidates = np.flatnonzero(np.abs(tableau[row, :n_struct]) > PIVOT_TOL)
                if candidates.size:
                    _pivot(tableau, row, int(candidates[0]))
                    basis[row] = int(candidates[0])

    phase2 = np.zeros(n_cols)
    phase2[:k] = p.c
    phase2[k:2 * k] = -p.c
    outcome, pivots = _simplex(tableau, basis, phase2, n_struct)
    total_pivots += pivots
    if outcome == "unbounded":
        logger.log_solver_event("lp", SolveStatus.UNBOUNDED.value, f"{total_pivots} pivots")
        return _non_optimal(SolveStatus.UNBOUNDED, p, total_pivots)

    z = np.zeros(n_cols)
    z[basis] = tableau[:, -1]
    theta = z[:k] - z[k:2 * k]

    if n_rows:
        basis_matrix = original[:, basis]
        try:
            y = solve(basis_matrix.T, phase2[basis])
        except SingularMatrix:
            y = np.linalg.lstsq(basis_matrix.T, phase2[basis], rcond=None)[0]
        lam_full = sign * y
    else:
        lam_full = np.zeros(0)

    logger.log_solver_event("lp", SolveStatus.OPTIMAL.value, f"{total_pivots} pivots")
    return LpSolution(
        status=SolveStatus.OPTIMAL,
        theta=theta,
        lambda_=lam_full[:p.m],
        slack=np.asarray(p.b) - np.asarray(p.A) @ theta,
        objective=float(p.c @ theta),
        lambda_nonneg=lam_full[p.m:],
        iterations=total_pivots,
    )


def _non_optimal(status: SolveStatus, p: LpProblem, pivots: int) -> LpSolution:
    return LpSolution(
        status=status,
        theta=np.full(p.k, np.nan),
        lambda_=np.full(p.m, np.nan),
        slack=np.full(p.m, np.nan),
        objective=float('nan'),
        lambda_nonneg=np.full(p.k if p.nonneg else 0, np.nan),
        iterations=pivots,
    )


def enumerate_vertices(p: LpProblem) -> List[Tuple[DenseVector, float]]:
    """
    All basic feasible points, best objective first.

    Raises:
        DimensionGuard: more than 20 rows plus columns
    """
    A_full, b_full = _with_sign_rows(p)
    n_rows, k = A_full.shape
    if n_rows + k > VERTEX_GUARD:
        raise DimensionGuard(f"m+k={n_rows + k} exceeds {VERTEX_GUARD}")

    vertices = {}
    for rows in combinations(range(n_rows), k):
        rows = list(rows)
        try:
            theta = solve(A_full[rows], b_full[rows])
        except SingularMatrix:
            continue
        if np.all(A_full @ theta <= b_full + 1e-9 * (1.0 + np.abs(b_full))):
            key = tuple(np.round(theta, 9))
            vertices.setdefault(key, np.asarray(theta))
    ranked = [(theta, float(p.c @ theta)) for theta in vertices.values()]
    ranked.sort(key=lambda item: -item[1])
    return ranked


def value_parameter_problem(p: LpProblem) -> LpProblem:
    """
    Lift max c'theta s.t. A theta <= b to variables (rho, theta) with rho = c'theta.

    The lifted LP maximizes rho, so inference on its first coordinate is
    inference on the optimal value rather than the optimizer.
    """
    k = p.k
    A = np.asarray(p.A)
    c = np.asarray(p.c)
    rows = [np.hstack([np.zeros((p.m, 1)), A]),
            np.hstack([[1.0], -c]).reshape(1, -1),
            np.hstack([[-1.0], c]).reshape(1, -1)]
    rhs = [np.asarray(p.b), np.zeros(2)]
    if p.nonneg:
        rows.append(np.hstack([np.zeros((k, 1)), -np.eye(k)]))
        rhs.append(np.zeros(k))
    objective = np.zeros(k + 1)
    objective[0] = 1.0
    return LpProblem(A=np.vstack(rows), b=np.concatenate(rhs), c=objective)
