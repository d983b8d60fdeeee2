"""
Primal active-set method for convex QPs.

    min c'theta + 1/2 theta'Q theta  s.t.  A_ineq theta >= b_ineq,  A_eq theta = b_eq

A feasible start comes from a phase-1 LP. Each iteration solves the
equality-constrained subproblem on the working set in the null space of the
working constraints; Q only needs to be positive semi-definite.
"""

from dataclasses import dataclass
from typing import List, Set, Tuple

import numpy as np
import scipy.linalg

from ..models.programs import LpProblem, QpProblem, QpSolution, SolveStatus
from ..utils.densela import DenseMatrix, DenseVector, robust_sym_inv
from ..utils.errors import MaxIterations
from ..utils.logger import InferenceLogger
from .lp_solver import solve_lp

ACTIVE_TOL = 1e-9
MULTIPLIER_TOL = 1e-9
KKT_TOL = 1e-10
DECREASE_TOL = 1e-15
CURVATURE_RTOL = 1e-12
RANK_TOL = 1e-10
MAX_ITERATIONS = 1000
JITTER = 1e-9


def _phase1(p: QpProblem):
    if p.m_ineq + p.m_eq == 0:
        return np.zeros(p.k)
    A = np.vstack([-p.A_ineq, p.A_eq, -p.A_eq])
    b = np.concatenate([-p.b_ineq, p.b_eq, -p.b_eq])
    start = solve_lp(LpProblem(A=A, b=b, c=np.zeros(p.k)))
    if start.status is not SolveStatus.OPTIMAL:
        return None
    return np.asarray(start.theta)


def _extends_rank(rows: List[np.ndarray], candidate: np.ndarray) -> bool:
    if not rows:
        return bool(np.linalg.norm(candidate) > RANK_TOL)
    current = np.vstack(rows)
    return np.linalg.matrix_rank(np.vstack([current, candidate]), tol=RANK_TOL) > \
        np.linalg.matrix_rank(current, tol=RANK_TOL)


@dataclass(frozen=True)
class _Step:
    """
    Search direction on the current working set.

    stationary: the reduced gradient is within tolerance, or the best step
        would not lower the objective measurably
    max_length: step multiple at which the objective stops decreasing along
        the direction (1 for a Newton step, inf for a zero-curvature ray)
    """

    direction: DenseVector
    stationary: bool
    max_length: float


def _subproblem_step(Q: DenseMatrix, g: DenseVector, A_work: DenseMatrix,
                     tolerance: float, objective: float) -> _Step:
    """
    Minimize 1/2 p'Qp + g'p subject to A_work p = 0.

    The reduced Hessian is split by eigenvalue into curved and flat
    directions, with flat meaning below 1e-12 of the largest eigenvalue. A
    reduced-gradient component along flat directions that exceeds the
    stationarity tolerance gives a ray with an exact line minimum; otherwise
    the step is the Newton step on the curved directions, taken with the
    ridge pseudo-inverse.
    """
    k = g.shape[0]
    basis = scipy.linalg.null_space(A_work, rcond=RANK_TOL) if A_work.shape[0] else np.eye(k)
    reduced_gradient = basis.T @ g
    if basis.shape[1] == 0 or np.linalg.norm(reduced_gradient) <= tolerance:
        return _Step(np.zeros(k), True, 0.0)

    hessian = basis.T @ Q @ basis
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (hessian + hessian.T))
    largest = max(float(eigenvalues[-1]), 0.0)
    curved = eigenvalues > CURVATURE_RTOL * largest if largest > 0.0 else np.zeros(eigenvalues.size, dtype=bool)

    flat_part = eigenvectors[:, ~curved] @ (eigenvectors[:, ~curved].T @ reduced_gradient)
    if np.linalg.norm(flat_part) > tolerance:
        direction = -basis @ flat_part
        curvature = float(direction @ Q @ direction)
        slope = float(g @ direction)
        max_length = -slope / curvature if curvature > 0.0 else np.inf
        return _Step(direction, False, max_length)

    curved_basis = basis @ eigenvectors[:, curved]
    curved_hessian = curved_basis.T @ Q @ curved_basis
    direction = -curved_basis @ (robust_sym_inv(0.5 * (curved_hessian + curved_hessian.T)) @ (curved_basis.T @ g))
    decrease = -float(g @ direction + 0.5 * direction @ Q @ direction)
    if decrease <= DECREASE_TOL * (1.0 + abs(objective)):
        return _Step(np.zeros(k), True, 0.0)
    return _Step(direction, False, 1.0)


def solve_qp(p: QpProblem) -> QpSolution:
    """
    Solve the QP by the primal active-set method.

    Constraints enter the working set when they block a step and leave it
    when their multiplier is the most negative one (lowest index on ties).
    A working set that recurs without the objective decreasing switches the
    drop rule to the lowest-index negative multiplier until progress resumes.

    Stationarity is judged on the reduced gradient relative to
    1 + ||Q theta|| + ||c||, never on step length.

    Raises:
        MaxIterations: more than 1000 iterations, which signals degeneracy
    """
    logger = InferenceLogger()
    x = _phase1(p)
    if x is None:
        logger.log_solver_event("qp", SolveStatus.INFEASIBLE.value, "phase 1 failed")
        return _non_optimal(SolveStatus.INFEASIBLE, p, 0, ())

    Q = np.asarray(p.Q)
    A_in, b_in = np.asarray(p.A_ineq), np.asarray(p.b_ineq)
    A_eq = np.asarray(p.A_eq)

    rows: List[np.ndarray] = []
    work_eq: List[int] = []
    for i in range(p.m_eq):
        if _extends_rank(rows, A_eq[i]):
            rows.append(A_eq[i])
            work_eq.append(i)
    work_in: List[int] = []
    residual = A_in @ x - b_in
    for i in range(p.m_ineq):
        if abs(residual[i]) <= ACTIVE_TOL * (1.0 + abs(b_in[i])) and _extends_rank(rows, A_in[i]):
            rows.append(A_in[i])
            work_in.append(i)

    objective = p.objective(x)
    trace = [objective]
    stalled: Set[Tuple[int, ...]] = set()
    for iteration in range(1, MAX_ITERATIONS + 1):
        g = Q @ x + p.c
        scale = 1.0 + np.linalg.norm(Q @ x) + np.linalg.norm(p.c)
        A_work = np.vstack([A_eq[work_eq], A_in[work_in]]) if work_eq or work_in else np.zeros((0, p.k))
        step = _subproblem_step(Q, g, A_work, KKT_TOL * scale, objective)

        if step.stationary:
            if A_work.shape[0]:
                multipliers = np.linalg.lstsq(A_work.T, g, rcond=None)[0]
            else:
                multipliers = np.zeros(0)
            mu_in = multipliers[len(work_eq):]
            if mu_in.size == 0 or mu_in.min() >= -MULTIPLIER_TOL * scale:
                lambda_ineq = np.zeros(p.m_ineq)
                lambda_ineq[work_in] = np.maximum(mu_in, 0.0)
                lambda_eq = np.zeros(p.m_eq)
                lambda_eq[work_eq] = multipliers[:len(work_eq)]
                logger.log_solver_event("qp", SolveStatus.OPTIMAL.value, f"{iteration} iterations")
                return QpSolution(
                    status=SolveStatus.OPTIMAL,
                    theta=x,
                    lambda_ineq=lambda_ineq,
                    lambda_eq=lambda_eq,
                    slack=A_in @ x - b_in,
                    objective=objective,
                    iterations=iteration,
                    trace=tuple(trace),
                )
            key = tuple(work_in)
            negative = np.flatnonzero(mu_in < -MULTIPLIER_TOL * scale)
            if key in stalled:
                dropped = min(work_in[t] for t in negative)
            else:
                stalled.add(key)
                most_negative = mu_in.min()
                dropped = min(work_in[t] for t in np.flatnonzero(mu_in <= most_negative + 1e-14 * scale))
            work_in.remove(dropped)
            trace.append(objective)
            continue

        alpha = step.max_length
        blocking = None
        direction = A_in @ step.direction
        residual = A_in @ x - b_in
        floor = 1e-12 * np.linalg.norm(step.direction)
        for i in range(p.m_ineq):
            if i in work_in or direction[i] >= -floor * np.linalg.norm(A_in[i]):
                continue
            ratio = max(residual[i], 0.0) / -direction[i]
            if ratio < alpha:
                alpha, blocking = ratio, i
        if not np.isfinite(alpha):
            logger.log_solver_event("qp", SolveStatus.UNBOUNDED.value, f"{iteration} iterations")
            return _non_optimal(SolveStatus.UNBOUNDED, p, iteration, tuple(trace))
        x = x + alpha * step.direction
        if blocking is not None:
            work_in.append(blocking)
            work_in.sort()
        updated = p.objective(x)
        if updated < objective - DECREASE_TOL * (1.0 + abs(objective)):
            stalled.clear()
        objective = updated
        trace.append(objective)

    raise MaxIterations(f"active-set method exceeded {MAX_ITERATIONS} iterations")


def solve_qp_with_retry(p: QpProblem) -> QpSolution:
    """solve_qp, retrying once with b_ineq relaxed by a deterministic 1e-9 jitter."""
    try:
        return solve_qp(p)
    except MaxIterations:
        InferenceLogger().log_warning("qp: iteration cap reached, retrying with jittered bounds")
        jitter = JITTER * (1.0 + np.arange(p.m_ineq)) / max(p.m_ineq, 1)
        relaxed = QpProblem(Q=p.Q, c=p.c, A_ineq=p.A_ineq, b_ineq=np.asarray(p.b_ineq) - jitter,
                            A_eq=p.A_eq, b_eq=p.b_eq)
        return solve_qp(relaxed)


def _non_optimal(status: SolveStatus, p: QpProblem, iterations: int, trace: Tuple[float, ...]) -> QpSolution:
    return QpSolution(
        status=status,
        theta=np.full(p.k, np.nan),
        lambda_ineq=np.full(p.m_ineq, np.nan),
        lambda_eq=np.full(p.m_eq, np.nan),
        slack=np.full(p.m_ineq, np.nan),
        objective=float('nan'),
        iterations=iterations,
        trace=trace,
    )
