"""
Leaf Sampling Kernels
Bayesian bootstrap over a leaf's values and truncated Gaussian kernel smoothing.
"""

from typing import Sequence, Tuple

import numpy as np
from scipy import stats


def bootstrap_weights(k: int, rng: np.random.Generator) -> np.ndarray:
    """
    Bayesian bootstrap probabilities over k atoms.

    Draws k-1 uniforms, sorts them, and returns the k gaps of
    0 < u_(1) < ... < u_(k-1) < 1; the gaps sum to one.
    """
    if k < 1:
        raise ValueError(f"need at least one atom (got {k})")
    cuts = np.sort(rng.uniform(0.0, 1.0, size=k - 1))
    return np.diff(np.concatenate(([0.0], cuts, [1.0])))


def bayesian_bootstrap(values: Sequence, count: int, rng: np.random.Generator) -> np.ndarray:
    """
    Sample `count` values i.i.d. from the Bayesian-bootstrap distribution over `values`.

    Args:
        values: Nonempty multiset of atoms
        count: Number of draws
        rng: Random generator

    Returns:
        Array of `count` atoms
    """
    atoms = np.asarray(values)
    weights = bootstrap_weights(len(atoms), rng)
    picks = rng.choice(len(atoms), size=count, replace=True, p=weights)
    return atoms[picks]


def kernel_sample_many(
    centers: np.ndarray,
    h: float,
    support: Tuple[float, float],
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Vectorized kernel_sample: one truncated normal draw per center, by inverse CDF.

    Args:
        centers: Kernel centers, each within support
        h: Bandwidth (standard deviation) >= 0
        support: (lo, hi) truncation window
        rng: Random generator

    Returns:
        Draws in [lo, hi]
    """
    centers = np.asarray(centers, dtype=np.float64)
    lo, hi = float(support[0]), float(support[1])
    if h < 0:
        raise ValueError(f"bandwidth must be >= 0 (got {h})")
    if h == 0 or lo == hi:
        return np.clip(centers, lo, hi) if lo < hi else np.full_like(centers, lo)

    a = (lo - centers) / h
    b = (hi - centers) / h
    u = rng.uniform(0.0, 1.0, size=centers.shape)
    draws = stats.truncnorm.ppf(u, a, b, loc=centers, scale=h)
    # ppf can return nan deep in a tail; fall back to the nearer bound
    bad = ~np.isfinite(draws)
    if bad.any():
        draws[bad] = np.where(np.abs(a[bad]) < np.abs(b[bad]), lo, hi)
    return np.clip(draws, lo, hi)


def kernel_sample(center: float, h: float, support: Tuple[float, float], rng: np.random.Generator) -> float:
    """Draw from Normal(center, h^2) truncated to support; h = 0 returns center."""
    return float(kernel_sample_many(np.array([center]), h, support, rng)[0])


def truncated_kernel_pdf(x, centers, h: float, support) -> np.ndarray:
    """
    Density at x of the truncated normal kernel centered at each center.

    Broadcasts x, centers and the (lo, hi) bounds, which may be arrays.
    Points outside support have density zero. Requires h > 0 and lo < hi.
    """
    lo = np.asarray(support[0], dtype=np.float64)
    hi = np.asarray(support[1], dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    mass = stats.norm.cdf((hi - centers) / h) - stats.norm.cdf((lo - centers) / h)
    density = stats.norm.pdf((x - centers) / h) / (h * np.maximum(mass, np.finfo(float).tiny))
    return np.where((x >= lo) & (x <= hi), density, 0.0)
