"""
Statistical primitives: chi-square quantiles, seeded Gaussian sampling and
covariance estimators for estimated program coefficients.
"""

from typing import Tuple, Union

import numpy as np
import scipy.optimize
import scipy.special

from .densela import DenseMatrix, DenseVector, ArrayLike
from .errors import DomainError, TooFewRows


class Rng:
    """
    Seeded Gaussian source.

    Uniforms come from numpy's counter-based Philox bit generator and are
    turned into normals with the Box-Muller transform, so identical seeds
    reproduce identical streams on every platform. Instances are
    single-owner; parallel replications derive their own with `derive`.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise DomainError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.Philox(self.seed))

    def derive(self, index: int) -> 'Rng':
        """Independent stream for replication `index`."""
        return Rng(self.seed + index)

    def standard_normal(self, size: Union[int, Tuple[int, ...]]) -> np.ndarray:
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u1 = 1.0 - self._generator.random(pairs)  # (0, 1]
        u2 = self._generator.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        draws = np.empty(2 * pairs)
        draws[0::2] = radius * np.cos(angle)
        draws[1::2] = radius * np.sin(angle)
        return draws[:count].reshape(shape)

    def normal(self, mean: ArrayLike, variance: ArrayLike, n: int) -> np.ndarray:
        """n independent draws per entry of N(mean, variance), shape (n, *mean.shape)."""
        mean = np.asarray(mean, dtype=np.float64)
        sd = np.sqrt(np.asarray(variance, dtype=np.float64))
        return mean + sd * self.standard_normal((n,) + mean.shape)

    def multivariate_normal(self, mean: ArrayLike, cov: ArrayLike, n: int) -> np.ndarray:
        """n rows drawn from N(mean, cov); cov may be singular."""
        mean = np.asarray(mean, dtype=np.float64)
        factor = _psd_factor(np.asarray(cov, dtype=np.float64))
        z = self.standard_normal((n, mean.size))
        return mean + z @ factor.T


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (cov + cov.T))
        return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def chi2_cdf(df: int, q: float) -> float:
    """Regularized lower incomplete gamma P(df/2, q/2)."""
    if q <= 0:
        return 0.0
    return float(scipy.special.gammainc(df / 2.0, q / 2.0))


def chi2_quantile(df: int, p: float) -> float:
    """
    Chi-square quantile by bisection on [0, df + 40*sqrt(2*df)].

    Raises:
        DomainError: df < 1, or p outside (0, 1)
    """
    if int(df) != df or df < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {df}")
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    upper = df + 40.0 * np.sqrt(2.0 * df)
    if chi2_cdf(df, upper) < p:
        raise DomainError(f"p={p} is beyond the bisection bracket for df={df}")
    return float(scipy.optimize.bisect(
        lambda q: chi2_cdf(df, q) - p, 0.0, upper, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500
    ))


def sample_mean_cov(data: ArrayLike) -> Tuple[DenseVector, DenseMatrix]:
    """
    Column means and the (n-1)-denominator covariance of the rows.

    Raises:
        TooFewRows: fewer than two rows
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[0] < 2:
        raise TooFewRows(f"need at least 2 rows, got {x.shape[0]}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    return mean, 0.5 * (cov + cov.T)


def moments_influence_cov(returns: ArrayLike) -> DenseMatrix:
    """
    Plug-in asymptotic covariance of (vec(Q_hat), R_hat).

    The per-observation influence terms are h_t = (vec((x_t - xbar)(x_t - xbar)'), x_t);
    their sample covariance estimates V for sqrt(T) times the estimation
    error, vec(Q_hat) block first, then R_hat.

    Raises:
        TooFewRows: fewer than two observations
    """
    x = np.asarray(returns, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    t_obs, k = x.shape
    if t_obs < 2:
        raise TooFewRows(f"need at least 2 observations, got {t_obs}")
    centered = x - x.mean(axis=0)
    outer = np.einsum('ti,tj->tji', centered, centered).reshape(t_obs, k * k)
    influence = np.hstack([outer, x])
    _, cov = sample_mean_cov(influence)
    return cov
