"""
Confidence sets by test inversion.

A point theta is accepted when its profiled statistic is at most the
chi-square critical value. Sets are depicted on a lattice over theta_box;
a single linear equality such as 1'theta = 1 is resolved exactly by
solving it for one dependent coordinate at every lattice point.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from ..models.confidence import ConfidenceSet, ConfidenceSpec, GridPoint, ThetaConstraints
from ..models.moments import EstimatedCoefficients, KktSystem
from ..utils.densela import DenseVector
from ..utils.errors import EmptySet, GridTooLarge, PreconditionError
from ..utils.logger import InferenceLogger
from .mpcc_profiler import profile_statistic

MAX_GRID_POINTS = 10_000_000
BOX_SE_MULTIPLE = 10.0
BOX_MIN_HALF_WIDTH = 1e-3
COEFFICIENT_TOL = 1e-12
MEMBERSHIP_TOL = 1e-9
PROGRESS_CHUNKS = 10


class ThetaLattice:
    """
    Lattice points of theta_box that satisfy the theta constraints.

    Coordinates listed in `fixed` are held at the given values. With one
    equality row, the last non-fixed coordinate that it involves is solved
    from the row instead of being gridded; every other coordinate is gridded
    from its lower bound in steps of `step`.
    """

    def __init__(self, box: Sequence[Tuple[float, float]], step: float, constraints: ThetaConstraints,
                 fixed: Optional[Dict[int, float]] = None):
        self.box = tuple(box)
        self.step = float(step)
        self.constraints = constraints
        self.fixed = dict(fixed or {})
        self.k = len(self.box)
        if constraints.eq_A.shape[0] > 1:
            raise PreconditionError("the lattice resolves at most one equality constraint")

        self.dependent: Optional[int] = None
        if constraints.eq_A.shape[0] == 1:
            involved = [j for j in range(self.k)
                        if j not in self.fixed and abs(constraints.eq_A[0, j]) > COEFFICIENT_TOL]
            if involved:
                self.dependent = involved[-1]
        self.grid_coordinates = tuple(j for j in range(self.k) if j not in self.fixed and j != self.dependent)
        self.axes = tuple(self._axis(j) for j in self.grid_coordinates)

    def _axis(self, j: int) -> np.ndarray:
        lo, hi = self.box[j]
        count = int(np.floor((hi - lo) / self.step + 1e-9)) + 1
        return np.round(lo + self.step * np.arange(count), 12)

    @property
    def candidate_count(self) -> int:
        return int(np.prod([axis.size for axis in self.axes], dtype=np.float64))

    def points(self) -> List[Tuple[Tuple[int, ...], DenseVector]]:
        """
        Raises:
            GridTooLarge: more than 10^7 candidate points
        """
        if self.candidate_count > MAX_GRID_POINTS:
            raise GridTooLarge(f"{self.candidate_count} lattice points exceed {MAX_GRID_POINTS}")
        return list(self._iterate())

    def _iterate(self) -> Iterator[Tuple[Tuple[int, ...], DenseVector]]:
        template = np.zeros(self.k)
        for j, value in self.fixed.items():
            template[j] = value
        for index in product(*(range(axis.size) for axis in self.axes)):
            theta = template.copy()
            for position, j in enumerate(self.grid_coordinates):
                theta[j] = self.axes[position][index[position]]
            if self.dependent is not None:
                a = self.constraints.eq_A[0]
                d = self.dependent
                rest = a @ theta - a[d] * theta[d]
                value = (self.constraints.eq_b[0] - rest) / a[d]
                theta[d] = 0.0 if abs(value) < COEFFICIENT_TOL else value
                lo, hi = self.box[d]
                if theta[d] < lo - MEMBERSHIP_TOL or theta[d] > hi + MEMBERSHIP_TOL:
                    continue
            if self.constraints.satisfied(theta):
                yield tuple(index), theta


def default_theta_box(theta_hat: DenseVector, est: EstimatedCoefficients) -> Tuple[Tuple[float, float], ...]:
    """theta_hat plus or minus ten standard errors, scaled by (1 + |theta_hat_j|)."""
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    diagonal = np.diag(est.V_hat)
    se = float(np.sqrt(np.max(diagonal) / est.n)) if diagonal.size else 0.0
    half = np.maximum(BOX_SE_MULTIPLE * se, BOX_MIN_HALF_WIDTH) * (1.0 + np.abs(theta_hat))
    return tuple((float(t - h), float(t + h)) for t, h in zip(theta_hat, half))


def _effective_constraints(sys: KktSystem, spec: ConfidenceSpec) -> ThetaConstraints:
    paired = [pair.slack_index for pair in sys.complementarity_pairs if pair.slack_kind == 'theta']
    return spec.constraints.with_nonneg(paired) if paired else spec.constraints


class ConfidenceSetBuilder:
    """
    Evaluates membership over lattices for one moment system.

    Args:
        sys: moment system of the program
        est: estimated coefficients
        spec: level, search box, lattice step and theta constraints
        warm_start: nuisance (lambda, s) of the sample program's solution,
            used as a second starting point of the weight iteration
    """

    def __init__(self, sys: KktSystem, est: EstimatedCoefficients, spec: ConfidenceSpec,
                 warm_start: Optional[DenseVector] = None):
        if spec.k != sys.k:
            raise PreconditionError(f"theta_box has {spec.k} coordinates, the program has {sys.k}")
        self.sys = sys
        self.est = est
        self.spec = spec
        self.warm_start = warm_start
        self.constraints = _effective_constraints(sys, spec)
        self.critical_value = spec.critical_value
        self.threads = spec.threads or os.cpu_count() or 1
        self.logger = InferenceLogger()

    def statistic(self, theta: DenseVector) -> float:
        return profile_statistic(self.sys, self.est, theta, self.warm_start).statistic

    def member(self, theta: DenseVector) -> Tuple[bool, float]:
        theta = np.asarray(theta, dtype=np.float64)
        if not self.constraints.satisfied(theta):
            raise PreconditionError(f"theta {theta.tolist()} violates the theta constraints")
        for j, (lo, hi) in enumerate(self.spec.theta_box):
            if theta[j] < lo - MEMBERSHIP_TOL or theta[j] > hi + MEMBERSHIP_TOL:
                raise PreconditionError(f"theta[{j}] = {theta[j]} lies outside [{lo}, {hi}]")
        statistic = self.statistic(theta)
        return statistic <= self.critical_value, statistic

    def _map(self, thetas: Sequence[DenseVector]) -> List[float]:
        if self.threads <= 1 or len(thetas) < 2:
            return [self.statistic(theta) for theta in thetas]
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            return list(executor.map(self.statistic, thetas))

    def scan(self) -> ConfidenceSet:
        lattice = ThetaLattice(self.spec.theta_box, self.spec.grid_step, self.constraints)
        candidates = lattice.points()
        total = len(candidates)
        statistics: List[float] = []
        chunk = max(1, -(-total // PROGRESS_CHUNKS))
        for start in range(0, total, chunk):
            batch = [theta for _, theta in candidates[start:start + chunk]]
            statistics.extend(self._map(batch))
            self.logger.log_grid_progress(len(statistics), total)

        points = tuple(GridPoint(theta=theta, statistic=statistic,
                                 accepted=statistic <= self.critical_value, index=index)
                       for (index, theta), statistic in zip(candidates, statistics))
        accepted = np.array([p.theta for p in points if p.accepted])
        projection = ()
        if accepted.size:
            projection = tuple((float(lo), float(hi)) for lo, hi in zip(accepted.min(axis=0), accepted.max(axis=0)))
        return ConfidenceSet(points=points, critical_value=self.critical_value, alpha=self.spec.alpha,
                             df=self.spec.df, projection=projection)

    def _fiber_accepts(self, j: int, value: float, anchor: DenseVector) -> bool:
        """Is some lattice point with theta_j == value accepted? Points near anchor are tried first."""
        fiber = ThetaLattice(self.spec.theta_box, self.spec.grid_step, self.constraints, fixed={j: value})
        thetas = [theta for _, theta in fiber.points()]
        thetas.sort(key=lambda theta: float(np.sum((theta - anchor) ** 2)))
        return any(self.statistic(theta) <= self.critical_value for theta in thetas)

    def _refine(self, j: int, inside: float, outside: float, anchor: DenseVector) -> float:
        tolerance = self.spec.grid_step / 10.0
        while abs(outside - inside) > tolerance:
            middle = 0.5 * (inside + outside)
            if self._fiber_accepts(j, middle, anchor):
                inside = middle
            else:
                outside = middle
        return inside

    def projection_interval(self, j: int, confidence_set: Optional[ConfidenceSet] = None) -> Tuple[float, float]:
        """
        Raises:
            EmptySet: no lattice point is accepted
        """
        cs = confidence_set if confidence_set is not None else self.scan()
        accepted = [p for p in cs.points if p.accepted]
        if not accepted:
            raise EmptySet(f"no accepted point; smallest statistic {cs.min_statistic:.6g} "
                           f"exceeds the critical value {cs.critical_value:.6g}", cs.min_statistic)
        low_point = min(accepted, key=lambda p: p.theta[j])
        high_point = max(accepted, key=lambda p: p.theta[j])
        box_lo, box_hi = self.spec.theta_box[j]
        step = self.spec.grid_step

        lower = float(low_point.theta[j])
        if lower - step >= box_lo - MEMBERSHIP_TOL:
            lower = self._refine(j, lower, lower - step, low_point.theta)
        upper = float(high_point.theta[j])
        if upper + step <= box_hi + MEMBERSHIP_TOL:
            upper = self._refine(j, upper, upper + step, high_point.theta)
        return lower, upper


def member(sys: KktSystem, est: EstimatedCoefficients, spec: ConfidenceSpec, theta: DenseVector,
           warm_start: Optional[DenseVector] = None) -> Tuple[bool, float]:
    """Accepted iff the profiled statistic at theta is at most chi2_{df}(1 - alpha)."""
    return ConfidenceSetBuilder(sys, est, spec, warm_start).member(theta)


def grid_scan(sys: KktSystem, est: EstimatedCoefficients, spec: ConfidenceSpec,
              warm_start: Optional[DenseVector] = None) -> ConfidenceSet:
    return ConfidenceSetBuilder(sys, est, spec, warm_start).scan()


def projection_interval(sys: KktSystem, est: EstimatedCoefficients, spec: ConfidenceSpec, j: int,
                        warm_start: Optional[DenseVector] = None,
                        confidence_set: Optional[ConfidenceSet] = None) -> Tuple[float, float]:
    """
    Bounds of the projection of the confidence set on coordinate j.

    The grid envelope is refined by bisection to grid_step/10, with
    membership at each trial value decided on a lattice over the remaining
    coordinates.
    """
    return ConfidenceSetBuilder(sys, est, spec, warm_start).projection_interval(j, confidence_set)


def _neighbour_offsets(dimension: int) -> List[Tuple[int, ...]]:
    return [offset for offset in product((-1, 0, 1), repeat=dimension) if any(offset)]


def accepted_components(cs: ConfidenceSet) -> List[List[GridPoint]]:
    """Connected components of the accepted points, lattice neighbours being adjacent, largest first."""
    accepted = {p.index: p for p in cs.points if p.accepted}
    graph = nx.Graph()
    graph.add_nodes_from(accepted)
    for index in accepted:
        for offset in _neighbour_offsets(len(index)):
            neighbour = tuple(i + o for i, o in zip(index, offset))
            if neighbour in accepted:
                graph.add_edge(index, neighbour)
    components = [sorted(component) for component in nx.connected_components(graph)]
    components.sort(key=lambda component: (-len(component), component[0]))
    return [[accepted[index] for index in component] for component in components]


def boundary_shell(cs: ConfidenceSet) -> List[GridPoint]:
    """Rejected points one lattice step from an accepted point."""
    accepted = {p.index for p in cs.points if p.accepted}
    shell = []
    for p in cs.points:
        if p.accepted:
            continue
        if any(tuple(i + o for i, o in zip(p.index, offset)) in accepted
               for offset in _neighbour_offsets(len(p.index))):
            shell.append(p)
    return shell
