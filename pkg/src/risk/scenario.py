"""
Intruder Scenarios
What an attacker is assumed to know when trying to recover geographies or identities.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from src.cart.export import MetadataLevel
from src.errors import ConfigError


class Knowledge(str, Enum):
    LOW = "low"    # no true geographies known
    HIGH = "high"  # knows every attribute and every other record's true location


class PriorKind(str, Enum):
    UNIFORM_GRID = "uniform_grid"
    EMPIRICAL_SYNTHETIC = "empirical_synthetic"


@dataclass(frozen=True)
class GeoPrior:
    """
    Intruder prior over a target's location.

    UNIFORM_GRID: nx x ny grid, either over a fixed extent or over a square
    window of side `window` centered at the target's true location.
    EMPIRICAL_SYNTHETIC: uniform over the pooled synthetic locations of all records.
    """

    kind: PriorKind = PriorKind.UNIFORM_GRID
    window: float = 10.0
    nx: int = 21
    ny: int = 21
    extent: Optional[Tuple[float, float, float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        if self.window <= 0:
            raise ConfigError(f"prior window must be > 0 (got {self.window})")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError(f"prior grid needs at least one point per axis (got {self.nx}x{self.ny})")
        if self.extent is not None:
            x_lo, x_hi, y_lo, y_hi = self.extent
            if not (x_lo < x_hi and y_lo < y_hi):
                raise ConfigError(f"prior extent must be (x_lo, x_hi, y_lo, y_hi) with lo < hi (got {self.extent})")

    def grid(self, center: Tuple[float, float]) -> np.ndarray:
        """(nx*ny, 2) grid of candidate points."""
        if self.extent is not None:
            x_lo, x_hi, y_lo, y_hi = self.extent
        else:
            half = self.window / 2.0
            x_lo, x_hi = center[0] - half, center[0] + half
            y_lo, y_hi = center[1] - half, center[1] + half
        xs = np.linspace(x_lo, x_hi, self.nx) if self.nx > 1 else np.array([(x_lo + x_hi) / 2.0])
        ys = np.linspace(y_lo, y_hi, self.ny) if self.ny > 1 else np.array([(y_lo + y_hi) / 2.0])
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class IntruderScenario:
    """
    Attacker knowledge.

    Attributes:
        knowledge: LOW or HIGH geography knowledge
        metadata_level: What the agency disclosed about the synthesizer
        prior: Prior over the target's location (geography attacks)
        known_quasi_identifiers: Keys the attacker holds for the target (identification attacks)
        sample_membership_known: Attacker knows the target is in the file
    """

    knowledge: Knowledge = Knowledge.HIGH
    metadata_level: MetadataLevel = MetadataLevel.RULES_ONLY
    prior: GeoPrior = field(default_factory=GeoPrior)
    known_quasi_identifiers: Tuple[str, ...] = ()
    sample_membership_known: bool = False

    def __post_init__(self):
        object.__setattr__(self, "knowledge", Knowledge(self.knowledge))
        object.__setattr__(self, "metadata_level", MetadataLevel(self.metadata_level))
        object.__setattr__(self, "known_quasi_identifiers", tuple(self.known_quasi_identifiers))
        if self.knowledge is Knowledge.HIGH and self.metadata_level < MetadataLevel.RULES_ONLY:
            raise ConfigError("HIGH knowledge scenario needs metadata level RULES_ONLY or FULL")

    def describe(self) -> str:
        return f"{self.knowledge.value}/{self.metadata_level.name}"
