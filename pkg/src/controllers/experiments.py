"""
Monte Carlo coverage studies.

Intersection bounds: theta = max(mu_1, mu_2) written as the LP
max -theta s.t. -theta <= -mu_j, with the sample means as the estimated b.
Only the two primal rows are moments; lambda_1 + lambda_2 = 1 is exact.

2x2 LP: max 3 t1 + 2 t2 s.t. t1 + 2 t2 <= 4, t1 - t2 <= 1, t >= 0 with every
coefficient estimated by the mean of n unit-variance normal draws.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..models.confidence import ConfidenceSpec, ThetaConstraints
from ..models.programs import LpProblem, SolveStatus
from ..models.simulation import CoverageTable, DesignId, SimDesign
from ..utils.densela import vec
from ..utils.errors import PreconditionError
from ..utils.logger import InferenceLogger
from ..utils.stats import Rng, sample_mean_cov
from .inference import ConfidenceSetBuilder
from .kkt_builder import build_lp_system, lp_coefficients, solution_nuisance
from .lp_solver import solve_lp

SIM1_MU = (5.0, 3.0)
SIM1_THETA0 = 5.0
SIM2_A = ((1.0, 2.0), (1.0, -1.0))
SIM2_B = (4.0, 1.0)
SIM2_C = (3.0, 2.0)
SIM2_THETA0 = (2.0, 1.0)
STANDARD_SAMPLE_SIZES = (100, 200, 500)
MEMBERSHIP_HALF_WIDTH = 1.0

SIM1_SIGMAS: Dict[DesignId, np.ndarray] = {
    DesignId.SIM1_DESIGN1: np.array([[1.0, 0.0], [0.0, 1.0]]),
    DesignId.SIM1_DESIGN2: np.array([[3.0, 0.0], [0.0, 1.0]]),
    DesignId.SIM1_DESIGN3: np.array([[3.0, 1.5], [1.5, 1.0]]),
}


def sim2_truth() -> np.ndarray:
    return np.concatenate([vec(np.array(SIM2_A)), SIM2_B, SIM2_C])


def make_design(design_id: DesignId, n: int, reps: int = 1000, alpha: float = 0.05,
                master_seed: int = 42, variance_override: Optional[float] = None) -> SimDesign:
    if design_id.is_sim1:
        return SimDesign(id=design_id, mu=SIM1_MU, sigma=SIM1_SIGMAS[design_id], n=n, reps=reps,
                         alpha=alpha, master_seed=master_seed, variance_override=variance_override)
    truth = sim2_truth()
    return SimDesign(id=design_id, mu=truth, sigma=np.eye(truth.size), n=n, reps=reps, alpha=alpha,
                     master_seed=master_seed, variance_override=variance_override)


DESIGNS = {design_id.value: design_id for design_id in DesignId}


def standard_designs(ns: Sequence[int] = STANDARD_SAMPLE_SIZES, reps: int = 1000, alpha: float = 0.05,
                  seed: int = 42) -> List[SimDesign]:
    """Every published design at every sample size, design-major."""
    return [make_design(design_id, n, reps, alpha, seed) for design_id in DesignId for n in ns]


def _point_spec(theta0: np.ndarray, alpha: float, df: int, constraints: Optional[ThetaConstraints] = None) -> ConfidenceSpec:
    box = tuple((t - MEMBERSHIP_HALF_WIDTH, t + MEMBERSHIP_HALF_WIDTH) for t in theta0)
    return ConfidenceSpec(alpha=alpha, df=df, theta_box=box, grid_step=MEMBERSHIP_HALF_WIDTH,
                          constraints=constraints, threads=1)


def sim1_replication(design: SimDesign, rep: int) -> bool:
    """Draw one sample and test whether the true theta is accepted."""
    rng = Rng(design.master_seed).derive(rep)
    sigma = design.sigma if design.variance_override is None else design.variance_override * np.eye(2)
    draws = rng.multivariate_normal(design.mu, sigma, design.n)
    x_bar, s_hat = sample_mean_cov(draws)

    problem = LpProblem(A=[[-1.0], [-1.0]], b=-x_bar, c=[-1.0])
    est = lp_coefficients(problem, ['b'], s_hat, design.n)
    sys = build_lp_system(problem, est)
    warm_start = np.concatenate(solution_nuisance(sys, solve_lp(problem).require_optimal()))
    theta0 = np.array([SIM1_THETA0])
    builder = ConfidenceSetBuilder(sys, est, _point_spec(theta0, design.alpha, sys.df), warm_start)
    accepted, _ = builder.member(theta0)
    return accepted


def sim2_replication(design: SimDesign, rep: int) -> bool:
    rng = Rng(design.master_seed).derive(rep)
    variance = np.diag(design.sigma) if design.variance_override is None \
        else np.full(design.mu.size, design.variance_override)
    draws = rng.normal(design.mu, variance, design.n)
    point = draws.mean(axis=0)
    entry_variance = draws.var(axis=0, ddof=1)

    A = point[:4].reshape((2, 2), order='F')
    problem = LpProblem(A=A, b=point[4:6], c=point[6:8], nonneg=True)
    est = lp_coefficients(problem, ['A', 'b', 'c'], np.diag(entry_variance), design.n)
    sys = build_lp_system(problem, est)
    solution = solve_lp(problem)
    warm_start = np.concatenate(solution_nuisance(sys, solution)) if solution.status is SolveStatus.OPTIMAL else None
    theta0 = np.array(SIM2_THETA0)
    spec = _point_spec(theta0, design.alpha, sys.df, ThetaConstraints(k=2, nonneg=(0, 1)))
    accepted, _ = ConfidenceSetBuilder(sys, est, spec, warm_start).member(theta0)
    return accepted


def _run(design: SimDesign, replication, threads: Optional[int]) -> float:
    logger = InferenceLogger()
    if design.reps == 0:
        return float('nan')
    workers = threads or os.cpu_count() or 1
    reps = range(design.reps)
    if workers <= 1:
        outcomes = [replication(design, rep) for rep in reps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(lambda rep: replication(design, rep), reps))
    coverage = float(np.mean(outcomes))
    logger.log_replication(design.label, design.reps, design.reps, coverage)
    return coverage


def run_sim1(design: SimDesign, threads: Optional[int] = None) -> float:
    """
    Empirical coverage of theta0 = max(mu) for an intersection-bounds design.

    Raises:
        PreconditionError: the design is not an intersection-bounds design
    """
    if not design.id.is_sim1:
        raise PreconditionError(f"design {design.id.value} is not an intersection-bounds design")
    return _run(design, sim1_replication, threads)


def run_sim2(design: SimDesign, threads: Optional[int] = None) -> float:
    """Empirical coverage of theta0 = (2, 1) for the estimated 2x2 LP."""
    if design.id is not DesignId.SIM2:
        raise PreconditionError(f"design {design.id.value} is not the LP design")
    return _run(design, sim2_replication, threads)


def run_design(design: SimDesign, threads: Optional[int] = None) -> float:
    return run_sim1(design, threads) if design.id.is_sim1 else run_sim2(design, threads)


def coverage_table(designs: Sequence[SimDesign], threads: Optional[int] = None) -> CoverageTable:
    """Run every design and arrange coverage by design and sample size."""
    labels: List[str] = []
    sizes: List[int] = []
    coverage = {}
    for design in designs:
        label = design.id.value
        if label not in labels:
            labels.append(label)
        if design.n not in sizes:
            sizes.append(design.n)
        coverage[(label, design.n)] = run_design(design, threads)
    return CoverageTable(designs=tuple(labels), sample_sizes=tuple(sorted(sizes)), coverage=coverage)


def coverage_frame(table: CoverageTable) -> pd.DataFrame:
    frame = pd.DataFrame(
        [[table.value(design, n) for n in table.sample_sizes] for design in table.designs],
        index=pd.Index(table.designs, name='design'),
        columns=[f"n={n}" for n in table.sample_sizes],
    )
    return frame


def write_coverage_csv(table: CoverageTable, path: str) -> None:
    coverage_frame(table).to_csv(path, float_format="%.10g", encoding='utf-8', lineterminator='\n')
    InferenceLogger().log_output(path)


def format_coverage_table(table: CoverageTable) -> str:
    """Aligned text layout, one row per design and one column per sample size."""
    if not table.designs:
        return ""
    return coverage_frame(table).to_string(float_format=lambda value: f"{value:.3f}")
