"""
Spatial Gaussian Process
Mean-zero exponential-covariance field used to give the surrogate outcome spatial structure.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from src.errors import ConfigError, FactorizationError


@dataclass(frozen=True)
class GpSpec:
    """
    Exponential covariance C(s, s') = sigma2_e * exp(-phi_e * |s - s'|) + jitter * I.

    Attributes:
        sigma2_e: Marginal variance
        phi_e: Decay rate
        jitter: Diagonal nugget (defaults to 1e-8 * sigma2_e)
    """

    sigma2_e: float = 2.0
    phi_e: float = 0.06
    jitter: Optional[float] = None

    def __post_init__(self):
        if self.sigma2_e <= 0:
            raise ConfigError(f"sigma2_e must be > 0 (got {self.sigma2_e})")
        if self.phi_e <= 0:
            raise ConfigError(f"phi_e must be > 0 (got {self.phi_e})")
        if self.jitter is not None and self.jitter < 0:
            raise ConfigError(f"jitter must be >= 0 (got {self.jitter})")

    @property
    def nugget(self) -> float:
        return 1e-8 * self.sigma2_e if self.jitter is None else self.jitter

    @property
    def effective_range(self) -> float:
        """Distance at which the correlation drops to 0.05."""
        return -math.log(0.05) / self.phi_e

    def covariance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        cov = self.sigma2_e * np.exp(-self.phi_e * cdist(points, points))
        cov[np.diag_indices_from(cov)] += self.nugget
        return cov


def simulate_gp(
    points: np.ndarray,
    spec: GpSpec,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> np.ndarray:
    """
    Draw w(s) ~ N(0, C) at the given points via a Cholesky factor.

    Args:
        points: (n, 2) locations
        spec: Covariance parameters
        rng: Random generator
        size: Number of independent fields (None for one)

    Returns:
        (n,) field, or (size, n) when size is given
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if not np.isfinite(points).all():
        raise ValueError("GP locations must be finite")
    try:
        factor = linalg.cholesky(spec.covariance(points), lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(
            f"covariance of {len(points)} points is not numerically positive definite; "
            f"increase jitter (currently {spec.nugget:g})"
        ) from exc
    count = 1 if size is None else size
    fields = rng.standard_normal((count, len(points))) @ factor.T
    return fields[0] if size is None else fields
