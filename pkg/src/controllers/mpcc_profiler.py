"""
Profiled test statistic under complementarity constraints.

For fixed theta the moments are affine in the nuisance vector z = (lambda, s).
Every complementarity pair is resolved by choosing which side is zero, so
each piece is a sign-constrained generalized least-squares problem. The
weight (G V G')^-1 depends on lambda when A is estimated; each piece is then
solved by iterated reweighting, with every frozen-weight step an exact
convex QP.
"""

from itertools import product
from typing import Optional, Sequence, Tuple

import numpy as np

from ..models.confidence import ProfileResult
from ..models.moments import EstimatedCoefficients, KktSystem
from ..models.programs import QpProblem, SolveStatus
from ..utils.densela import DenseVector, robust_sym_inv
from ..utils.errors import NoFeasiblePiece, PieceLimitExceeded, PreconditionError
from ..utils.logger import InferenceLogger
from .kkt_builder import eval_moments
from .qp_solver import solve_qp_with_retry

MAX_PAIRS = 20
MAX_SWEEPS = 100
SWEEP_TOL = 1e-10
THETA_ZERO_TOL = 1e-9
CONSTRAINT_TOL = 1e-9


def _statistic(sys: KktSystem, est: EstimatedCoefficients, theta: DenseVector, z: DenseVector) -> float:
    lam, slack = z[:sys.n_lambda], z[sys.n_lambda:]
    g, G = eval_moments(sys, est, theta, lam, slack)
    W = robust_sym_inv(G @ est.V_stochastic @ G.T)
    return float(est.n * g @ W @ g)


def _piece_layout(sys: KktSystem, theta: DenseVector, piece: Sequence[str]):
    """Free nuisance positions and which of them must stay non-negative."""
    n_lambda = sys.n_lambda
    fixed = set()
    for pair, side in zip(sys.complementarity_pairs, piece):
        if side == 'L':
            fixed.add(pair.lambda_index)
        elif pair.slack_kind == 's':
            fixed.add(n_lambda + pair.slack_index)
        elif abs(theta[pair.slack_index]) > THETA_ZERO_TOL:
            raise PreconditionError(f"piece puts theta[{pair.slack_index}] at zero but it is {theta[pair.slack_index]}")
    free = [i for i in range(sys.n_nuisance) if i not in fixed]
    signed = set(range(sys.n_nuisance)) - set(sys.equality_multiplier_indices)
    bounded = [position for position, i in enumerate(free) if i in signed]
    return free, bounded


def _frozen_weight_step(sys, est, theta, free, bounded, W, M_moment, d_moment, M_constraint, d_constraint):
    """Minimize n*g'Wg over the free nuisance with W held fixed; None when the piece is infeasible."""
    z = np.zeros(sys.n_nuisance)
    E_constraint = M_constraint[:, free]
    involved = np.any(E_constraint != 0.0, axis=1)
    if np.any(np.abs(d_constraint[~involved]) > CONSTRAINT_TOL):
        return None
    E_constraint, d_constraint = E_constraint[involved], d_constraint[involved]
    if not free:
        return z

    E_moment = M_moment[:, free]
    hessian = 2.0 * est.n * E_moment.T @ W @ E_moment
    gradient = 2.0 * est.n * E_moment.T @ W @ d_moment
    scale = max(1.0, float(np.max(np.abs(hessian))), float(np.max(np.abs(gradient))))
    hessian = 0.5 * (hessian + hessian.T) / scale

    A_ineq = np.eye(len(free))[bounded] if bounded else None
    b_ineq = np.zeros(len(bounded)) if bounded else None
    A_eq = E_constraint if E_constraint.shape[0] else None
    b_eq = -d_constraint if E_constraint.shape[0] else None
    solution = solve_qp_with_retry(QpProblem(Q=hessian, c=gradient / scale, A_ineq=A_ineq, b_ineq=b_ineq,
                                             A_eq=A_eq, b_eq=b_eq))
    if solution.status is not SolveStatus.OPTIMAL:
        return None
    y = np.array(solution.theta)
    y[bounded] = np.maximum(y[bounded], 0.0)
    z[free] = y
    return z


def minimize_piece(sys: KktSystem, est: EstimatedCoefficients, theta: DenseVector, piece: Sequence[str],
                   start: Optional[DenseVector] = None) -> Tuple[float, DenseVector, DenseVector, int, bool]:
    """
    Minimize the statistic over one complementarity piece.

    Args:
        piece: one entry per complementarity pair, "L" to fix the multiplier
            at zero, "S" to fix the slack (or theta coordinate) at zero
        start: nuisance vector (lambda, s) whose lambda seeds the first weight

    Returns:
        (value, lambda, s, sweeps, converged); value is inf for an infeasible piece
    """
    theta = np.asarray(theta, dtype=np.float64)
    free, bounded = _piece_layout(sys, theta, piece)
    M, d = sys.nuisance_form(est.point, theta)
    moment, constraint = list(sys.moment_rows), list(sys.constraint_rows)
    M_moment, d_moment = M[moment], d[moment]
    M_constraint, d_constraint = M[constraint], d[constraint]

    z = np.zeros(sys.n_nuisance)
    if start is not None:
        z[free] = np.asarray(start, dtype=np.float64)[free]
        signed = [free[position] for position in bounded]
        z[signed] = np.maximum(z[signed], 0.0)

    sweeps = 1 if not sys.weight_depends_on_lambda else MAX_SWEEPS
    best_value, best_z = np.inf, None
    previous = np.inf
    for sweep in range(1, sweeps + 1):
        _, G = eval_moments(sys, est, theta, z[:sys.n_lambda], z[sys.n_lambda:])
        W = robust_sym_inv(G @ est.V_stochastic @ G.T)
        z_new = _frozen_weight_step(sys, est, theta, free, bounded, W, M_moment, d_moment, M_constraint, d_constraint)
        if z_new is None:
            return np.inf, np.zeros(sys.n_lambda), np.zeros(sys.n_slack), sweep, True
        z = z_new
        value = _statistic(sys, est, theta, z)
        if value < best_value:
            best_value, best_z = value, z.copy()
        if abs(value - previous) < SWEEP_TOL * (1.0 + abs(value)):
            return best_value, best_z[:sys.n_lambda], best_z[sys.n_lambda:], sweep, True
        previous = value
    converged = sweeps == 1
    return best_value, best_z[:sys.n_lambda], best_z[sys.n_lambda:], sweeps, converged


def enumerate_pieces(sys: KktSystem, theta: DenseVector):
    """All complementarity pieces consistent with theta; theta-slack pairs never branch."""
    options = []
    for pair in sys.complementarity_pairs:
        if pair.slack_kind == 'theta':
            options.append(('S',) if abs(theta[pair.slack_index]) <= THETA_ZERO_TOL else ('L',))
        else:
            options.append(('L', 'S'))
    return list(product(*options))


def profile_statistic(sys: KktSystem, est: EstimatedCoefficients, theta: DenseVector,
                      warm_start: Optional[DenseVector] = None) -> ProfileResult:
    """
    Profile the nuisance out of n*Q_n at theta.

    Each piece is started from lambda = 0 and, when given, from warm_start
    (typically the sample program's multipliers and slacks); the smaller
    value wins.

    Raises:
        PieceLimitExceeded: more than 20 complementarity pairs
        NoFeasiblePiece: every piece violates the deterministic rows
        PreconditionError: a coordinate paired with a multiplier is negative
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (sys.k,):
        raise PreconditionError(f"theta has shape {theta.shape}, expected ({sys.k},)")
    if len(sys.complementarity_pairs) > MAX_PAIRS:
        raise PieceLimitExceeded(f"{len(sys.complementarity_pairs)} complementarity pairs exceed {MAX_PAIRS}")
    for pair in sys.complementarity_pairs:
        if pair.slack_kind == 'theta' and theta[pair.slack_index] < -THETA_ZERO_TOL:
            raise PreconditionError(f"theta[{pair.slack_index}] = {theta[pair.slack_index]} must be non-negative")

    starts = [None]
    if warm_start is not None and sys.weight_depends_on_lambda:
        starts.append(np.asarray(warm_start, dtype=np.float64))

    best = None
    total_sweeps = 0
    for piece in enumerate_pieces(sys, theta):
        for start in starts:
            value, lam, slack, sweeps, converged = minimize_piece(sys, est, theta, piece, start)
            total_sweeps += sweeps
            if np.isfinite(value) and (best is None or value < best[0]):
                best = (value, lam, slack, piece, converged)

    if best is None:
        raise NoFeasiblePiece("no complementarity piece satisfies the deterministic constraints")
    value, lam, slack, piece, converged = best
    if not converged:
        InferenceLogger().log_warning(f"weight iteration did not settle within {MAX_SWEEPS} sweeps; "
                                      f"keeping the smallest statistic {value:.6g}")
    InferenceLogger().log_profile(theta, value, piece)
    return ProfileResult(statistic=max(value, 0.0), lambda_star=lam, s_star=slack, piece=tuple(piece),
                         iterations=total_sweeps, converged=converged)
