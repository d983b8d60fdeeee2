from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from ..utils.densela import DenseMatrix, DenseVector, as_matrix, as_vector, is_symmetric
from ..utils.errors import DimensionMismatch, EmptyPanel, InvalidProblem

PSD_TOL = 1e-8


@dataclass(frozen=True)
class ReturnPanel:
    """Daily yields in percent per annum, one column per asset."""
    dates: Tuple[pd.Timestamp, ...]
    tickers: Tuple[str, ...]
    values: DenseMatrix
    dropped_rows: int = 0

    def __post_init__(self):
        values = as_matrix(self.values, allow_empty=True)
        if values.shape[0] == 0:
            raise EmptyPanel("return panel has no rows")
        if values.shape != (len(self.dates), len(self.tickers)):
            raise DimensionMismatch(
                f"values are {values.shape} for {len(self.dates)} dates and {len(self.tickers)} tickers"
            )
        if np.any(~np.isfinite(values)):
            raise InvalidProblem("return panel has missing or non-finite cells")
        if any(later <= earlier for earlier, later in zip(self.dates, self.dates[1:])):
            raise InvalidProblem("panel dates must be strictly increasing")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'tickers', tuple(self.tickers))
        object.__setattr__(self, 'dates', tuple(self.dates))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PortfolioInstance:
    """
    Estimated inputs of the long-only minimum-variance problem at target return mu.

    V_hat is the asymptotic covariance of (vec(Q_hat), R_hat), in that order.
    """
    R_hat: DenseVector
    Q_hat: DenseMatrix
    V_hat: DenseMatrix
    n: int
    mu: float
    tickers: Tuple[str, ...] = ()

    def __post_init__(self):
        R = as_vector(self.R_hat)
        Q = as_matrix(self.Q_hat)
        V = as_matrix(self.V_hat)
        k = R.shape[0]
        if Q.shape != (k, k):
            raise DimensionMismatch(f"Q_hat is {Q.shape} for {k} assets")
        if V.shape != (k * k + k, k * k + k):
            raise DimensionMismatch(f"V_hat is {V.shape}, expected {(k * k + k, k * k + k)}")
        if not is_symmetric(Q, PSD_TOL) or np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))) < -PSD_TOL:
            raise InvalidProblem("Q_hat must be symmetric positive semi-definite")
        if self.n < 1:
            raise InvalidProblem(f"sample size must be positive, got {self.n}")
        tickers = tuple(self.tickers) or tuple(f"asset{j + 1}" for j in range(k))
        if len(tickers) != k:
            raise DimensionMismatch(f"{len(tickers)} tickers for {k} assets")
        object.__setattr__(self, 'R_hat', R)
        object.__setattr__(self, 'Q_hat', Q)
        object.__setattr__(self, 'V_hat', V)
        object.__setattr__(self, 'mu', float(self.mu))
        object.__setattr__(self, 'tickers', tickers)

    @property
    def k(self) -> int:
        return self.R_hat.shape[0]
