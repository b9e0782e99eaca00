"""
Empirical Correlogram
Binned distance versus residual correlation, a quick check for leftover spatial dependence.
"""

from typing import Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from src.data.schema import Dataset
from src.utils.logger import get_logger

logger = get_logger(__name__)

MIN_PAIRS = 30


def variogram_check(
    ds: Dataset,
    residuals: Union[str, np.ndarray],
    bins: Sequence[float],
    min_pairs: int = MIN_PAIRS,
) -> pd.DataFrame:
    """
    Correlation of residual pairs grouped by separation distance.

    Each bin [lo, hi) collects the record pairs at that distance; the
    correlation is the Pearson correlation of the pairs taken in both orders.
    Bins with fewer than `min_pairs` pairs are dropped with a warning.

    Args:
        ds: Records with coordinates
        residuals: Column name or an array aligned with ds rows
        bins: Increasing bin edges
        min_pairs: Smallest usable bin

    Returns:
        DataFrame with bin_lo, bin_hi, distance (mean pair distance), pairs, correlation
    """
    edges = np.asarray(bins, dtype=np.float64)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bins must be at least two increasing edges")
    values = ds.column(residuals) if isinstance(residuals, str) else np.asarray(residuals, dtype=np.float64)
    values = values.astype(np.float64)
    if len(values) != ds.n:
        raise ValueError(f"need one residual per record ({len(values)} given for {ds.n})")

    distances = pdist(ds.coords())
    first, second = np.triu_indices(ds.n, k=1)
    slot = np.searchsorted(edges, distances, side="right") - 1

    rows = []
    dropped = 0
    for b in range(len(edges) - 1):
        in_bin = slot == b
        pairs = int(in_bin.sum())
        if pairs < min_pairs:
            dropped += 1
            continue
        a = values[first[in_bin]]
        c = values[second[in_bin]]
        x = np.concatenate([a, c])
        y = np.concatenate([c, a])
        correlation = float(np.corrcoef(x, y)[0, 1]) if x.std() > 0 else float("nan")
        rows.append(
            {
                "bin_lo": edges[b],
                "bin_hi": edges[b + 1],
                "distance": float(distances[in_bin].mean()),
                "pairs": pairs,
                "correlation": correlation,
            }
        )
    if dropped:
        logger.warning(f"Dropped {dropped} distance bins with fewer than {min_pairs} pairs")
    return pd.DataFrame(rows, columns=["bin_lo", "bin_hi", "distance", "pairs", "correlation"])
