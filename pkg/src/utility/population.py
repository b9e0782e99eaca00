"""
Population Simulator
Clustered synthetic populations whose demographics vary over space.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.data.schema import Dataset, Schema, VariableKind, VariableRole, VariableSpec
from src.errors import ConfigError
from src.synthesis.sampling import kernel_sample_many
from src.utils.logger import get_logger

logger = get_logger(__name__)

DOMAIN = (1.0, 100.0)
AGE_RANGE = (18.0, 99.0)

SEX_LEVELS = ("female", "male")
RACE_LEVELS = ("white", "black")
EDUC_LEVELS = ("less_than_hs", "high_school", "college")
MARITAL_LEVELS = ("married", "never_married", "widowed", "divorced")
AUTOPSY_LEVELS = ("no", "yes", "missing")


@dataclass(frozen=True)
class ClusterSpec:
    """
    One neighborhood.

    Attributes:
        weight: Relative share of the population
        center: (x, y) center on the recoded map
        scale: (sd_x, sd_y) spread along each axis
        share_black: P(race = black)
        share_male: P(sex = male)
        age_mean: Mean age
        age_sd: Age spread
        educ: Probabilities over EDUC_LEVELS
        marital: Probabilities over MARITAL_LEVELS
    """

    weight: float
    center: Tuple[float, float]
    scale: Tuple[float, float]
    share_black: float
    share_male: float = 0.5
    age_mean: float = 65.0
    age_sd: float = 15.0
    educ: Tuple[float, ...] = (0.35, 0.4, 0.25)
    marital: Tuple[float, ...] = (0.45, 0.2, 0.25, 0.1)

    def __post_init__(self):
        if self.weight <= 0:
            raise ConfigError(f"cluster weight must be > 0 (got {self.weight})")
        if min(self.scale) <= 0:
            raise ConfigError(f"cluster scale must be > 0 (got {self.scale})")
        for name in ("share_black", "share_male"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if len(self.educ) != len(EDUC_LEVELS) or len(self.marital) != len(MARITAL_LEVELS):
            raise ConfigError("educ / marital probabilities must match their level lists")

    @classmethod
    def from_dict(cls, raw: Dict[str, object]) -> "ClusterSpec":
        values = dict(raw)
        values["center"] = tuple(values["center"])
        values["scale"] = tuple(values["scale"])
        for name in ("educ", "marital"):
            if name in values:
                values[name] = tuple(values[name])
        return cls(**values)


DEFAULT_CLUSTERS: Tuple[ClusterSpec, ...] = (
    ClusterSpec(0.30, (25.0, 30.0), (8.0, 12.0), share_black=0.70, share_male=0.45, age_mean=62.0, age_sd=16.0,
                educ=(0.50, 0.35, 0.15), marital=(0.30, 0.35, 0.20, 0.15)),
    ClusterSpec(0.30, (70.0, 70.0), (12.0, 8.0), share_black=0.10, share_male=0.50, age_mean=72.0, age_sd=12.0,
                educ=(0.20, 0.40, 0.40), marital=(0.50, 0.10, 0.30, 0.10)),
    ClusterSpec(0.25, (75.0, 25.0), (10.0, 10.0), share_black=0.40, share_male=0.55, age_mean=55.0, age_sd=18.0,
                educ=(0.35, 0.45, 0.20), marital=(0.40, 0.30, 0.15, 0.15)),
    ClusterSpec(0.15, (30.0, 75.0), (15.0, 6.0), share_black=0.25, share_male=0.50, age_mean=68.0, age_sd=14.0,
                educ=(0.30, 0.40, 0.30), marital=(0.45, 0.15, 0.30, 0.10)),
)

AUTOPSY_PROBS = (0.80, 0.15, 0.05)


def population_schema() -> Schema:
    """Schema of simulate_population output."""
    return Schema(
        (
            VariableSpec("lon", VariableKind.CONTINUOUS, role=VariableRole.LONGITUDE),
            VariableSpec("lat", VariableKind.CONTINUOUS, role=VariableRole.LATITUDE),
            VariableSpec("sex", VariableKind.CATEGORICAL, levels=SEX_LEVELS),
            VariableSpec("race", VariableKind.CATEGORICAL, levels=RACE_LEVELS),
            VariableSpec("age", VariableKind.CONTINUOUS),
            VariableSpec("educ", VariableKind.CATEGORICAL, levels=EDUC_LEVELS),
            VariableSpec("marital", VariableKind.CATEGORICAL, levels=MARITAL_LEVELS),
            VariableSpec("autopsy", VariableKind.CATEGORICAL, levels=AUTOPSY_LEVELS),
        )
    )


def _categorical(rng: np.random.Generator, levels: Sequence[str], probs: np.ndarray) -> np.ndarray:
    """One draw per row of a (rows, len(levels)) probability matrix."""
    cumulative = np.cumsum(probs, axis=1)
    cumulative /= cumulative[:, -1:]
    u = rng.uniform(size=(len(probs), 1))
    picks = (u > cumulative).sum(axis=1)
    return np.asarray(levels, dtype=object)[np.minimum(picks, len(levels) - 1)]


def simulate_population(
    n: int,
    clusters: Optional[Sequence[ClusterSpec]] = None,
    rng: Optional[np.random.Generator] = None,
) -> Dataset:
    """
    Simulate n people living in Gaussian neighborhoods on [1, 100]^2.

    Locations are truncated normals around each cluster center; demographics
    follow the cluster's distributions, so attributes are spatially dependent.
    Ages are whole years.

    Args:
        n: Population size (>= 1)
        clusters: Neighborhood mixture (DEFAULT_CLUSTERS when None)
        rng: Random generator

    Returns:
        Dataset with lon, lat, sex, race, age, educ, marital and autopsy
    """
    if n < 1:
        raise ConfigError(f"population size must be >= 1 (got {n})")
    clusters = tuple(clusters or DEFAULT_CLUSTERS)
    rng = rng or np.random.default_rng()

    weights = np.array([c.weight for c in clusters], dtype=np.float64)
    membership = rng.choice(len(clusters), size=n, p=weights / weights.sum())

    lon = np.empty(n)
    lat = np.empty(n)
    age = np.empty(n)
    for index, cluster in enumerate(clusters):
        rows = np.flatnonzero(membership == index)
        if len(rows) == 0:
            continue
        cx = float(np.clip(cluster.center[0], *DOMAIN))
        cy = float(np.clip(cluster.center[1], *DOMAIN))
        lon[rows] = kernel_sample_many(np.full(len(rows), cx), cluster.scale[0], DOMAIN, rng)
        lat[rows] = kernel_sample_many(np.full(len(rows), cy), cluster.scale[1], DOMAIN, rng)
        center_age = float(np.clip(cluster.age_mean, *AGE_RANGE))
        age[rows] = np.round(kernel_sample_many(np.full(len(rows), center_age), cluster.age_sd, AGE_RANGE, rng))

    table = {c: np.array([getattr(cluster, c) for cluster in clusters]) for c in ("share_black", "share_male")}
    black = table["share_black"][membership]
    male = table["share_male"][membership]
    frame = pd.DataFrame(
        {
            "lon": lon,
            "lat": lat,
            "sex": _categorical(rng, SEX_LEVELS, np.column_stack([1.0 - male, male])),
            "race": _categorical(rng, RACE_LEVELS, np.column_stack([1.0 - black, black])),
            "age": age,
            "educ": _categorical(rng, EDUC_LEVELS, np.array([c.educ for c in clusters])[membership]),
            "marital": _categorical(rng, MARITAL_LEVELS, np.array([c.marital for c in clusters])[membership]),
            "autopsy": _categorical(rng, AUTOPSY_LEVELS, np.tile(AUTOPSY_PROBS, (n, 1))),
        }
    )
    logger.debug(f"Simulated population of {n} in {len(clusters)} clusters")
    return Dataset.from_frame(population_schema(), frame)
