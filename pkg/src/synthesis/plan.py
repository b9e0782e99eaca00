"""
Synthesis Plan
Which variables are replaced, in what order, with what bandwidths and tree settings.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from src.cart.tree import TreeParams
from src.data.schema import Schema, VariableRole
from src.errors import ConfigError

DEFAULT_GEO_BANDWIDTH = 1.0
DEFAULT_ATTRIBUTE_BANDWIDTH = 2.0


@dataclass(frozen=True)
class SynthesisPlan:
    """
    Ordered synthesis recipe.

    Attributes:
        order: Variables to synthesize, geography first
        bandwidths: Kernel bandwidth per continuous variable in `order`
        m: Number of synthetic datasets
        tree_params: Stopping rules shared by all trees
        seed: Base seed; replicate l draws from the stream seeded (seed, l)
        tree_params_by_variable: Per-variable overrides of tree_params
        per_record_bootstrap: Redraw bootstrap weights for every record instead of once per node
    """

    order: Tuple[str, ...]
    bandwidths: Mapping[str, float] = field(default_factory=dict)
    m: int = 5
    tree_params: TreeParams = field(default_factory=TreeParams)
    seed: int = 0
    tree_params_by_variable: Mapping[str, TreeParams] = field(default_factory=dict)
    per_record_bootstrap: bool = False

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        object.__setattr__(self, "bandwidths", dict(self.bandwidths))
        object.__setattr__(self, "tree_params_by_variable", dict(self.tree_params_by_variable))
        if not self.order:
            raise ConfigError("synthesis plan needs at least one variable")
        if len(set(self.order)) != len(self.order):
            raise ConfigError(f"synthesis order repeats a variable: {list(self.order)}")
        if self.m < 2:
            raise ConfigError(f"m must be >= 2 so the between-replicate variance exists (got {self.m})")
        for name, h in self.bandwidths.items():
            if h < 0:
                raise ConfigError(f"bandwidth for '{name}' must be >= 0 (got {h})")
        if self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer (got {self.seed})")

    def validate(self, schema: Schema) -> None:
        """Check the plan against a dataset schema; raises ConfigError."""
        for name in self.order:
            if name not in schema:
                raise ConfigError(f"synthesis plan references unknown variable '{name}'")
            if schema[name].role is VariableRole.OUTCOME:
                raise ConfigError(f"outcome variable '{name}' cannot be synthesized")
        for name in list(self.bandwidths) + list(self.tree_params_by_variable):
            if name not in self.order:
                raise ConfigError(f"setting given for '{name}', which is not in the synthesis order")

        geography = set(schema.geography)
        seen_attribute = False
        for name in self.order:
            if name in geography and seen_attribute:
                raise ConfigError(f"geography variable '{name}' must come before attribute variables")
            seen_attribute = seen_attribute or name not in geography

    def bandwidth(self, name: str, schema: Schema) -> float:
        if schema[name].is_categorical:
            return 0.0
        if name in self.bandwidths:
            return float(self.bandwidths[name])
        return DEFAULT_GEO_BANDWIDTH if name in schema.geography else DEFAULT_ATTRIBUTE_BANDWIDTH

    def params_for(self, name: str) -> TreeParams:
        return self.tree_params_by_variable.get(name, self.tree_params)

    def predictors_for(self, schema: Schema, name: str) -> List[str]:
        """
        Conditioning set of one plan variable.

        Every variable outside the plan, followed by the plan variables that
        precede `name`. Later plan variables are excluded, so attributes being
        synthesized never inform the geography trees.
        """
        position = self.order.index(name)
        outside = [var for var in schema.names if var not in self.order]
        return outside + list(self.order[:position])

    def to_dict(self) -> Dict[str, object]:
        return {
            "order": list(self.order),
            "bandwidths": dict(self.bandwidths),
            "m": self.m,
            "tree_params": self.tree_params.to_dict(),
            "seed": self.seed,
            "tree_params_by_variable": {k: v.to_dict() for k, v in self.tree_params_by_variable.items()},
            "per_record_bootstrap": self.per_record_bootstrap,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, object]) -> "SynthesisPlan":
        return cls(
            order=tuple(raw["order"]),
            bandwidths={k: float(v) for k, v in dict(raw.get("bandwidths", {})).items()},
            m=int(raw.get("m", 5)),
            tree_params=TreeParams(**dict(raw.get("tree_params", {}))),
            seed=int(raw.get("seed", 0)),
            tree_params_by_variable={
                k: TreeParams(**dict(v)) for k, v in dict(raw.get("tree_params_by_variable", {})).items()
            },
            per_record_bootstrap=bool(raw.get("per_record_bootstrap", False)),
        )


def default_plan(
    schema: Schema,
    attributes: Sequence[str] = (),
    latitude_first: bool = False,
    h_geo: float = DEFAULT_GEO_BANDWIDTH,
    h_attribute: float = DEFAULT_ATTRIBUTE_BANDWIDTH,
    m: int = 5,
    seed: int = 0,
    tree_params: Optional[TreeParams] = None,
) -> SynthesisPlan:
    """
    Geography-first plan: (longitude, latitude) or the reverse, then `attributes`.

    Continuous attributes get h_attribute; categorical ones need no bandwidth.
    """
    lon, lat = schema.geography
    geography = [lat, lon] if latitude_first else [lon, lat]
    bandwidths = {lon: h_geo, lat: h_geo}
    for name in attributes:
        if name in schema and schema[name].is_continuous:
            bandwidths[name] = h_attribute
    return SynthesisPlan(
        order=tuple(geography + list(attributes)),
        bandwidths=bandwidths,
        m=m,
        tree_params=tree_params or TreeParams(),
        seed=seed,
    )
