"""
Combining Rules for Partially Synthetic Data
Pools per-replicate estimates into one point estimate, variance and t reference distribution.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from src.errors import ArityError


@dataclass(frozen=True)
class ReplicateEstimate:
    """
    Estimate from a single synthetic dataset.

    Attributes:
        q: Point estimate
        u: Its estimated variance
        label: Estimand name (coefficient name for regressions)
    """

    q: float
    u: float
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.q) and math.isfinite(self.u)):
            raise ValueError(f"estimate must be finite (q={self.q}, u={self.u})")
        if self.u < 0:
            raise ValueError(f"variance must be >= 0 (got {self.u})")


@dataclass(frozen=True)
class MiEstimate:
    """
    Combined inference over m replicates.

    T_m = u_bar + b_m / m, with t reference distribution on nu_m degrees of
    freedom (infinite when the replicates agree exactly).
    """

    q_bar: float
    u_bar: float
    b_m: float
    t_m: float
    nu_m: float
    m: int
    label: str = ""

    @property
    def se(self) -> float:
        return math.sqrt(self.t_m)

    def quantile(self, level: float) -> float:
        """Two-sided critical value for a `level` interval."""
        p = (1.0 + level) / 2.0
        if math.isinf(self.nu_m):
            return float(stats.norm.ppf(p))
        return float(stats.t.ppf(p, self.nu_m))

    def ci(self, level: float = 0.95) -> Tuple[float, float]:
        if not 0.0 < level < 1.0:
            raise ValueError(f"confidence level must be in (0, 1) (got {level})")
        half = self.quantile(level) * self.se
        return self.q_bar - half, self.q_bar + half

    def to_dict(self, level: float = 0.95) -> Dict[str, object]:
        lo, hi = self.ci(level)
        return {
            "estimand": self.label,
            "q_bar": self.q_bar,
            "se": self.se,
            "nu_m": self.nu_m,
            "ci_lower": lo,
            "ci_upper": hi,
            "m": self.m,
        }


EstimateLike = Union[ReplicateEstimate, Tuple[float, float]]


def combine(estimates: Sequence[EstimateLike], label: str = "") -> MiEstimate:
    """
    Combine m replicate estimates.

    Args:
        estimates: One (q, u) per synthetic dataset
        label: Estimand name; defaults to the first estimate's label

    Returns:
        MiEstimate with q_bar, u_bar, b_m, T_m and nu_m
    """
    items = [e if isinstance(e, ReplicateEstimate) else ReplicateEstimate(float(e[0]), float(e[1])) for e in estimates]
    m = len(items)
    if m < 2:
        raise ArityError(f"combining rules need at least 2 estimates (got {m})")

    q = np.array([e.q for e in items], dtype=np.float64)
    u = np.array([e.u for e in items], dtype=np.float64)
    q_bar = float(q.mean())
    u_bar = float(u.mean())
    b_m = float(np.sum((q - q_bar) ** 2) / (m - 1))
    t_m = u_bar + b_m / m
    if b_m > 0:
        nu_m = (m - 1) * (1.0 + m * u_bar / b_m) ** 2
    else:
        nu_m = math.inf
    return MiEstimate(
        q_bar=q_bar,
        u_bar=u_bar,
        b_m=b_m,
        t_m=t_m,
        nu_m=float(nu_m),
        m=m,
        label=label or items[0].label,
    )


def combine_by_label(per_replicate: Sequence[Sequence[ReplicateEstimate]]) -> List[MiEstimate]:
    """
    Combine several estimands at once (e.g. all coefficients of a regression).

    Labels missing from any replicate are left out. Output follows the first
    replicate's label order.
    """
    if len(per_replicate) < 2:
        raise ArityError(f"combining rules need at least 2 replicates (got {len(per_replicate)})")
    tables = [{e.label: e for e in estimates} for estimates in per_replicate]
    common = [e.label for e in per_replicate[0] if all(e.label in table for table in tables)]
    return [combine([table[label] for table in tables], label=label) for label in common]
