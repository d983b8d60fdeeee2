"""
Long-only minimum-variance portfolio with confidence sets on the weights.

    min 1/2 theta'Q theta  s.t.  R'theta = mu,  1'theta = 1,  theta >= 0

The expected returns R and covariance Q are estimated from a daily panel.
theta doubles as the slack of its own sign constraints, so the moment
system has the return row plus one dual row per asset (df = 1 + k), while
1'theta = 1 involves no estimate and is enforced exactly by the lattice.
"""

import json
import os
import re
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..models.confidence import ConfidenceSet, ConfidenceSpec, GridPoint, ThetaConstraints
from ..models.moments import EstimatedCoefficients, KktSystem
from ..models.portfolio_types import PortfolioInstance, ReturnPanel
from ..models.programs import LpSolution, QpProblem, QpSolution, SolveStatus
from ..utils.densela import DenseVector
from ..utils.errors import EmptyPanel, ParseError, PreconditionError, TooFewRows
from ..utils.logger import InferenceLogger
from ..utils.stats import Rng, moments_influence_cov, sample_mean_cov
from .inference import ConfidenceSetBuilder, boundary_shell
from .kkt_builder import build_qp_system, qp_layout, solution_nuisance
from .qp_solver import solve_qp_with_retry

PUBLISHED_TICKERS = ('TBILL', 'AAA', 'BBB')
PUBLISHED_R = (2.2550, 2.5137, 3.9256)
PUBLISHED_Q = ((0.5976, 0.2336, 0.2758),
           (0.2336, 0.2674, 0.2285),
           (0.2758, 0.2285, 0.4488))
PUBLISHED_START = '2010-01-04'
PUBLISHED_END = '2017-07-31'
MAX_SIMPLEX_ASSETS = 6
SIMPLEX_TOL = 1e-9

_LINE_PATTERN = re.compile(r'line (\d+)')


def ingest_csv(path: str) -> ReturnPanel:
    """
    Read a `date,<ticker1>,...` CSV of yields.

    Rows with an unparsable date or value are dropped and counted; the rest
    are sorted by date.

    Raises:
        ParseError: malformed file structure or duplicated dates
        EmptyPanel: no usable rows
    """
    logger = InferenceLogger()
    try:
        raw = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False)
    except pd.errors.EmptyDataError as exc:
        raise EmptyPanel(f"{path} is empty") from exc
    except pd.errors.ParserError as exc:
        match = _LINE_PATTERN.search(str(exc))
        raise ParseError(str(exc).strip(), int(match.group(1)) if match else None) from exc

    columns = [str(column).strip() for column in raw.columns]
    if not columns or columns[0].lower() != 'date' or len(columns) < 2:
        raise ParseError("header must be date,<ticker1>,...,<tickerk>", 1)
    raw.columns = columns
    tickers = tuple(columns[1:])

    dates = pd.to_datetime(raw['date'].str.strip(), format='%Y-%m-%d', errors='coerce')
    values = raw[list(tickers)].apply(lambda column: pd.to_numeric(column.str.strip(), errors='coerce'))
    usable = dates.notna() & values.notna().all(axis=1)
    dropped = int((~usable).sum())
    if dropped:
        logger.log_warning(f"{path}: dropped {dropped} row(s) with missing or unparsable cells")

    frame = values[usable].assign(date=dates[usable]).sort_values('date', kind='mergesort')
    if frame.empty:
        raise EmptyPanel(f"{path} has no usable rows")
    duplicated = frame['date'].duplicated()
    if duplicated.any():
        line = int(frame.index[duplicated.to_numpy()][0]) + 2
        raise ParseError(f"duplicate date {frame['date'][duplicated].iloc[0].date()}", line)

    return ReturnPanel(dates=tuple(frame['date']), tickers=tickers,
                       values=frame[list(tickers)].to_numpy(dtype=np.float64), dropped_rows=dropped)


def estimate_instance(panel: ReturnPanel, mu: float, annualize_factor: float = 1.0) -> PortfolioInstance:
    """
    Sample means, covariance and the influence covariance of both.

    Yields are taken as annual percent levels. annualize_factor multiplies
    Q_hat and rescales the vec(Q) block of V_hat to match.

    Raises:
        TooFewRows: fewer than k + 2 observations
    """
    if panel.T < panel.k + 2:
        raise TooFewRows(f"{panel.T} observations for {panel.k} assets; need at least {panel.k + 2}")
    R_hat, Q_hat = sample_mean_cov(panel.values)
    V_hat = moments_influence_cov(panel.values)
    k2 = panel.k * panel.k
    scale = np.concatenate([np.full(k2, annualize_factor), np.ones(panel.k)])
    return PortfolioInstance(R_hat=R_hat, Q_hat=annualize_factor * Q_hat, V_hat=V_hat * np.outer(scale, scale),
                             n=panel.T, mu=mu, tickers=panel.tickers)


def qp_problem(inst: PortfolioInstance) -> QpProblem:
    k = inst.k
    return QpProblem(Q=inst.Q_hat, c=np.zeros(k), A_ineq=np.eye(k), b_ineq=np.zeros(k),
                     A_eq=np.vstack([inst.R_hat, np.ones(k)]), b_eq=np.array([inst.mu, 1.0]))


def estimated_coefficients(inst: PortfolioInstance) -> EstimatedCoefficients:
    """Stacked QP coefficients with R (the first A_eq row) and Q marked as estimated."""
    problem = qp_problem(inst)
    blocks = qp_layout(problem)
    layout = {block.name: block for block in blocks}
    k = inst.k
    q_positions = [layout['Q'].offset + l for l in range(k * k)]
    r_positions = [layout['A_eq'].index(0, j) for j in range(k)]
    positions = q_positions + r_positions

    point = np.concatenate([problem.A_ineq.reshape(-1, order='F'), problem.b_ineq,
                            problem.A_eq.reshape(-1, order='F'), problem.b_eq,
                            problem.c, problem.Q.reshape(-1, order='F')])
    size = point.size
    mask = np.zeros(size, dtype=bool)
    mask[positions] = True
    V_full = np.zeros((size, size))
    V_full[np.ix_(positions, positions)] = inst.V_hat
    return EstimatedCoefficients(point=point, V_hat=V_full, n=inst.n, stochastic_mask=tuple(mask), blocks=blocks)


def efficient_weights(inst: PortfolioInstance) -> QpSolution:
    """Minimum-variance long-only weights; status Infeasible when mu is not attainable."""
    solution = solve_qp_with_retry(qp_problem(inst))
    if solution.status is not SolveStatus.OPTIMAL:
        InferenceLogger().log_warning(f"no long-only portfolio reaches mu={inst.mu}")
    return solution


def portfolio_system(inst: PortfolioInstance) -> Tuple[KktSystem, EstimatedCoefficients, Optional[DenseVector]]:
    """Moment system, coefficients and the point solution's nuisance (None when infeasible)."""
    est = estimated_coefficients(inst)
    sys = build_qp_system(qp_problem(inst), est)
    solution = efficient_weights(inst)
    warm_start = None
    if solution.status is SolveStatus.OPTIMAL:
        warm_start = np.concatenate(solution_nuisance(sys, solution))
    return sys, est, warm_start


def simplex_spec(k: int, df: int, alpha: float, grid_step: float, threads: Optional[int] = None) -> ConfidenceSpec:
    constraints = ThetaConstraints(k=k, nonneg=tuple(range(k)), eq_A=np.ones((1, k)), eq_b=np.ones(1))
    return ConfidenceSpec(alpha=alpha, df=df, theta_box=tuple((0.0, 1.0) for _ in range(k)),
                          grid_step=grid_step, constraints=constraints, threads=threads)


def portfolio_cs(inst: PortfolioInstance, alpha: float, grid_step: float,
                 threads: Optional[int] = None) -> ConfidenceSet:
    """
    Confidence set for the weights over a lattice on the simplex.

    Raises:
        PreconditionError: more than six assets
    """
    if inst.k > MAX_SIMPLEX_ASSETS:
        raise PreconditionError(f"simplex lattice supports at most {MAX_SIMPLEX_ASSETS} assets, got {inst.k}")
    sys, est, warm_start = portfolio_system(inst)
    spec = simplex_spec(inst.k, sys.df, alpha, grid_step, threads)
    return ConfidenceSetBuilder(sys, est, spec, warm_start).scan()


def retest_weights(inst_new: PortfolioInstance, theta_old: Sequence[float], alpha: float = 0.10) -> Tuple[bool, float]:
    """
    Test whether previously chosen weights are still in the confidence set.

    Raises:
        PreconditionError: theta_old is not on the simplex
    """
    theta_old = np.asarray(theta_old, dtype=np.float64)
    if theta_old.shape != (inst_new.k,) or abs(theta_old.sum() - 1.0) > SIMPLEX_TOL \
            or np.any(theta_old < -SIMPLEX_TOL):
        raise PreconditionError(f"weights {theta_old.tolist()} are not on the simplex")
    sys, est, warm_start = portfolio_system(inst_new)
    spec = simplex_spec(inst_new.k, sys.df, alpha, grid_step=0.01, threads=1)
    return ConfidenceSetBuilder(sys, est, spec, warm_start).member(theta_old)


def make_fixture_panel(T: Optional[int] = None, seed: int = 2017) -> ReturnPanel:
    """
    Deterministic panel whose sample mean and covariance equal the published R and Q.

    Gaussian draws are whitened to an exactly identity sample covariance and
    then coloured with the Cholesky factor of Q. Dates are business days
    from 2010-01-04 (through 2017-07-31 when T is not given).
    """
    dates = pd.bdate_range(PUBLISHED_START, PUBLISHED_END) if T is None else pd.bdate_range(PUBLISHED_START, periods=T)
    k = len(PUBLISHED_R)
    z = Rng(seed).standard_normal((len(dates), k))
    z = z - z.mean(axis=0)
    _, z_cov = sample_mean_cov(z)
    white = z @ np.linalg.inv(np.linalg.cholesky(z_cov)).T
    values = np.asarray(PUBLISHED_R) + white @ np.linalg.cholesky(np.asarray(PUBLISHED_Q)).T
    return ReturnPanel(dates=tuple(dates), tickers=PUBLISHED_TICKERS, values=values)


def write_fixture_csv(panel: ReturnPanel, path: str) -> None:
    frame = pd.DataFrame(panel.values, columns=list(panel.tickers))
    frame.insert(0, 'date', [date.strftime('%Y-%m-%d') for date in panel.dates])
    frame.to_csv(path, index=False, float_format="%.10g", encoding='utf-8', lineterminator='\n')
    InferenceLogger().log_output(path)


def output_points(cs: ConfidenceSet) -> List[GridPoint]:
    """Accepted points plus the rejected shell around them, in lattice order."""
    shell = {id(p) for p in boundary_shell(cs)}
    return [p for p in cs.points if p.accepted or id(p) in shell]


def write_cs_points(cs: ConfidenceSet, path: str, names: Sequence[str]) -> None:
    """CSV with columns <names>, statistic, accepted (0/1)."""
    points = output_points(cs)
    frame = pd.DataFrame([p.theta for p in points], columns=list(names)) if points \
        else pd.DataFrame(columns=list(names))
    frame['statistic'] = [p.statistic for p in points]
    frame['accepted'] = [int(p.accepted) for p in points]
    frame.to_csv(path, index=False, float_format="%.10g", encoding='utf-8', lineterminator='\n')
    InferenceLogger().log_output(path)


def _significant(values) -> List[float]:
    return [float(f"{value:.10g}") for value in np.asarray(values, dtype=np.float64)]


def write_solution(path: str, solution: Union[LpSolution, QpSolution], mu: Optional[float], alpha: float,
                   critical_value: float, projection: Sequence[Tuple[float, float]] = ()) -> None:
    """JSON with the point solution, its multipliers and the test level; numbers carry 10 significant digits."""
    if isinstance(solution, LpSolution):
        multipliers = np.concatenate([solution.lambda_, solution.lambda_nonneg])
    else:
        multipliers = np.concatenate([solution.lambda_ineq, solution.lambda_eq])
    payload = {
        'status': solution.status.value,
        'theta': _significant(solution.theta),
        'lambda': _significant(multipliers),
        'mu': None if mu is None else float(f"{mu:.10g}"),
        'alpha': float(f"{alpha:.10g}"),
        'critical_value': float(f"{critical_value:.10g}"),
    }
    if projection:
        payload['projection'] = [_significant(bounds) for bounds in projection]
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        json.dump(payload, handle, indent=2, allow_nan=True)
        handle.write('\n')
    InferenceLogger().log_output(path)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
