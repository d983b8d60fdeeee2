from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from ..utils.densela import DenseMatrix, DenseVector, as_matrix, as_vector
from ..utils.errors import InvalidProblem


class DesignId(Enum):
    """Monte Carlo designs, valued by their command-line name."""
    SIM1_DESIGN1 = "1a"
    SIM1_DESIGN2 = "1b"
    SIM1_DESIGN3 = "1c"
    SIM2 = "2"

    @property
    def is_sim1(self) -> bool:
        return self is not DesignId.SIM2


@dataclass(frozen=True)
class SimDesign:
    """
    One Monte Carlo cell.

    For the intersection-bounds designs, mu and sigma describe the bivariate
    normal draws. For the LP design, mu is the stacked (vec(A), b, c) and
    sigma the per-entry variance (1 unless variance_override is set).
    """
    id: DesignId
    mu: DenseVector
    sigma: DenseMatrix
    n: int
    reps: int = 1000
    alpha: float = 0.05
    master_seed: int = 42
    variance_override: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'mu', as_vector(self.mu))
        object.__setattr__(self, 'sigma', as_matrix(self.sigma))
        if self.n < 2:
            raise InvalidProblem(f"sample size must be at least 2, got {self.n}")
        if self.reps < 0:
            raise InvalidProblem(f"replication count must be non-negative, got {self.reps}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidProblem(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.variance_override is not None and self.variance_override < 0:
            raise InvalidProblem("variance override must be non-negative")

    @property
    def label(self) -> str:
        return f"{self.id.value}, n={self.n}"


@dataclass(frozen=True)
class CoverageTable:
    """Empirical coverage by design (rows) and sample size (columns)."""
    designs: Tuple[str, ...] = ()
    sample_sizes: Tuple[int, ...] = ()
    coverage: Dict[Tuple[str, int], float] = field(default_factory=dict)

    def value(self, design: str, n: int) -> float:
        return self.coverage.get((design, n), float(np.nan))
