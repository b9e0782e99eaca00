"""
Random Noise Baseline
Perturbs each location with bivariate normal noise calibrated to its geography risk.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.data.schema import Dataset
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class NoiseResult:
    """Noised dataset plus which records had a coordinate clipped back into the extent."""

    dataset: Dataset
    clipped: np.ndarray

    @property
    def clipped_count(self) -> int:
        return int(self.clipped.sum())


def add_geographic_noise(
    ds: Dataset,
    r1: np.ndarray,
    rng: np.random.Generator,
    extent: Tuple[float, float, float, float] = (1.0, 100.0, 1.0, 100.0),
) -> NoiseResult:
    """
    s* ~ N(s, diag(sd^2, sd^2)) with sd = R1 / sqrt(2), so E|s* - s|^2 = R1^2.

    Coordinates leaving the extent are clipped to it and flagged.

    Args:
        ds: Original data
        r1: Per-record R1 (aligned with ds rows)
        rng: Random generator
        extent: (x_lo, x_hi, y_lo, y_hi)

    Returns:
        NoiseResult
    """
    r1 = np.asarray(r1, dtype=np.float64)
    if len(r1) != ds.n:
        raise ValueError(f"need one R1 per record ({len(r1)} given for {ds.n})")
    if (r1 < 0).any() or not np.isfinite(r1).all():
        raise ValueError("R1 values must be finite and >= 0")

    sd = r1 / np.sqrt(2.0)
    coords = ds.coords()
    noised = coords + rng.standard_normal(coords.shape) * sd[:, None]
    lo = np.array([extent[0], extent[2]])
    hi = np.array([extent[1], extent[3]])
    bounded = np.clip(noised, lo, hi)
    clipped = (bounded != noised).any(axis=1)
    if clipped.any():
        logger.warning(f"Clipped {int(clipped.sum())} noised locations back into the map extent")

    lon, lat = ds.schema.geography
    return NoiseResult(dataset=ds.with_columns({lon: bounded[:, 0], lat: bounded[:, 1]}), clipped=clipped)
