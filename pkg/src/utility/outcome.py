"""
Surrogate Spatial Outcome
Binary outcome from a logistic model with demographic main effects plus a spatial GP field.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np
from scipy.special import expit

from src.data.schema import Dataset, Schema, VariableKind, VariableRole, VariableSpec
from src.errors import SchemaError
from src.utility.gp import GpSpec, simulate_gp

OUTCOME_LEVELS = ("0", "1")


@dataclass(frozen=True)
class SurrogateOutcomeSpec:
    """
    logit(pi) = intercept + coef_sex * [sex == sex_one] + coef_race * [race == race_one]
                + coef_age * age + w(s)

    The 0/1 coding of sex and race is configurable through sex_one / race_one.
    """

    intercept: float = 0.02
    coef_sex: float = 1.0
    coef_race: float = 1.0
    coef_age: float = 0.003
    gp: GpSpec = field(default_factory=GpSpec)
    spatial: bool = True
    sex_column: str = "sex"
    race_column: str = "race"
    age_column: str = "age"
    sex_one: str = "male"
    race_one: str = "black"

    def __post_init__(self):
        for name in ("intercept", "coef_sex", "coef_race", "coef_age"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def without_field(self) -> "SurrogateOutcomeSpec":
        return replace(self, spatial=False)

    def coefficients(self) -> Dict[str, float]:
        return {
            "intercept": self.intercept,
            self.sex_column: self.coef_sex,
            self.race_column: self.coef_race,
            self.age_column: self.coef_age,
        }


def linear_predictor(ds: Dataset, spec: SurrogateOutcomeSpec) -> np.ndarray:
    """Nonspatial part of the logit."""
    for name in (spec.sex_column, spec.race_column, spec.age_column):
        if name not in ds.schema:
            raise SchemaError("surrogate outcome needs this column", column=name)
    sex = (ds.column(spec.sex_column) == spec.sex_one).astype(np.float64)
    race = (ds.column(spec.race_column) == spec.race_one).astype(np.float64)
    age = ds.column(spec.age_column).astype(np.float64)
    return spec.intercept + spec.coef_sex * sex + spec.coef_race * race + spec.coef_age * age


def outcome_probability(ds: Dataset, spec: SurrogateOutcomeSpec, w: Optional[np.ndarray] = None) -> np.ndarray:
    eta = linear_predictor(ds, spec)
    if w is not None:
        eta = eta + w
    return expit(eta)


def generate_surrogate_outcome(
    ds: Dataset,
    spec: SurrogateOutcomeSpec,
    rng: np.random.Generator,
    w: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Draw the binary surrogate outcome for every record.

    Args:
        ds: Records with sex, race, age and coordinates
        spec: Outcome model
        rng: Random generator
        w: Precomputed field values; drawn from spec.gp at the records' locations
           when None and spec.spatial is set

    Returns:
        0/1 integer array
    """
    if w is None and spec.spatial:
        w = simulate_gp(ds.coords(), spec.gp, rng)
    p = outcome_probability(ds, spec, w if spec.spatial else None)
    return (rng.uniform(size=len(p)) < p).astype(np.int64)


def attach_outcome(ds: Dataset, y: np.ndarray, name: str = "outcome") -> Dataset:
    """Dataset with a 0/1 categorical outcome column appended (or replaced)."""
    y = np.asarray(y)
    variables = [var for var in ds.schema.variables if var.name != name]
    variables.append(VariableSpec(name, VariableKind.CATEGORICAL, levels=OUTCOME_LEVELS, role=VariableRole.OUTCOME))
    schema = Schema(tuple(variables), require_coordinates=ds.schema.require_coordinates)
    frame = ds.frame.copy()
    frame[name] = np.where(y.astype(np.int64) == 1, "1", "0")
    return Dataset.from_frame(schema, frame)
