"""
Run Configuration Loader
Load run configurations from JSON files, apply command-line overrides, and validate them.
"""

import hashlib
import json
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from src.cart.export import MetadataLevel
from src.cart.tree import TreeParams
from src.data.csv_io import schema_sidecar_path
from src.data.regions import GridRegionMap, RegionMap, load_polygons_csv
from src.data.schema import Schema, load_schema
from src.errors import ConfigError
from src.risk.scenario import GeoPrior, IntruderScenario, Knowledge, PriorKind
from src.synthesis.plan import SynthesisPlan, default_plan
from src.utility.comparisons import Estimand
from src.utility.gp import GpSpec
from src.utility.outcome import SurrogateOutcomeSpec
from src.utility.population import ClusterSpec

CONFIG_DIR = Path(__file__).parent / "configs"

SECTIONS = ("data", "plan", "scenario", "regions", "experiment", "population")
TOP_LEVEL = ("name", "description", "seed", "workers", "output_dir") + SECTIONS


@dataclass(frozen=True)
class PlanSettings:
    """Synthesis settings; resolved into a SynthesisPlan once the schema is known."""

    attributes: Tuple[str, ...] = ()
    latitude_first: bool = False
    h: float = 1.0
    h_attribute: float = 2.0
    m: int = 5
    tree_params: TreeParams = field(default_factory=TreeParams)
    tree_params_by_variable: Mapping[str, TreeParams] = field(default_factory=dict)
    per_record_bootstrap: bool = False
    metadata_level: MetadataLevel = MetadataLevel.RULES_ONLY

    def build(self, schema: Schema, seed: int) -> SynthesisPlan:
        base = default_plan(
            schema,
            attributes=self.attributes,
            latitude_first=self.latitude_first,
            h_geo=self.h,
            h_attribute=self.h_attribute,
            m=self.m,
            seed=seed,
            tree_params=self.tree_params,
        )
        plan = replace(
            base,
            tree_params_by_variable=dict(self.tree_params_by_variable),
            per_record_bootstrap=self.per_record_bootstrap,
        )
        plan.validate(schema)
        return plan


@dataclass(frozen=True)
class RegionSettings:
    kind: str = "grid"
    nx: int = 4
    ny: int = 4
    extent: Tuple[float, float, float, float] = (1.0, 100.0, 1.0, 100.0)
    polygons: Optional[Path] = None

    def build(self) -> RegionMap:
        if self.kind == "polygons":
            if self.polygons is None:
                raise ConfigError("regions.kind 'polygons' needs regions.polygons (a CSV path)")
            return load_polygons_csv(self.polygons)
        return GridRegionMap(self.nx, self.ny, tuple(self.extent))


@dataclass(frozen=True)
class ExperimentSettings:
    reps: int = 100
    test_fraction: float = 0.075
    estimands: Tuple[Estimand, ...] = ()
    outcome: str = "outcome"
    predictors: Tuple[str, ...] = ("sex", "race", "age")
    mc_draws: int = 50
    noise_reps: int = 100


@dataclass(frozen=True)
class PopulationSettings:
    n: int = 2000
    clusters: Optional[Tuple[ClusterSpec, ...]] = None
    outcome: SurrogateOutcomeSpec = field(default_factory=SurrogateOutcomeSpec)


@dataclass(frozen=True)
class RunConfig:
    """
    Everything one CLI run needs.

    Attributes:
        name: Short run name
        description: Free text
        source: Config file path (None for built-in defaults)
        input_path: Original data CSV
        schema_path: Schema JSON (defaults to the CSV's sidecar)
        recode: Map coordinates onto [1, 100] before synthesis
        plan: Synthesis settings
        scenario: Intruder scenario
        regions: Region map settings
        experiment: Repetition and estimand settings
        population: Simulated population settings
        output_dir: Where artifacts are written
        seed: Base seed
        workers: Thread pool size
        raw: Merged configuration document (hashed into the manifest)
    """

    name: str = "run"
    description: str = ""
    source: Optional[Path] = None
    input_path: Optional[Path] = None
    schema_path: Optional[Path] = None
    recode: bool = True
    plan: PlanSettings = field(default_factory=PlanSettings)
    scenario: IntruderScenario = field(default_factory=IntruderScenario)
    regions: RegionSettings = field(default_factory=RegionSettings)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    population: PopulationSettings = field(default_factory=PopulationSettings)
    output_dir: Path = Path("output")
    seed: int = 0
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    raw: Mapping[str, Any] = field(default_factory=dict, repr=False)

    def config_hash(self) -> str:
        """SHA-256 of the merged configuration in canonical JSON form."""
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def resolved_schema_path(self) -> Optional[Path]:
        if self.schema_path is not None:
            return self.schema_path
        if self.input_path is not None:
            return schema_sidecar_path(self.input_path)
        return None


class _Locator:
    """Finds the line of a key in the config text, for line-anchored messages."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line_of(self, *keys: str) -> Optional[int]:
        for key in reversed(keys):
            pattern = re.compile(r'"' + re.escape(key) + r'"\s*:')
            for number, line in enumerate(self.lines, start=1):
                if pattern.search(line):
                    return number
        return None


def _section(raw: Mapping[str, Any], name: str, locator: _Locator) -> Dict[str, Any]:
    value = raw.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"section '{name}' must be an object", line=locator.line_of(name))
    return dict(value)


def _number(section: Mapping[str, Any], key: str, default, kind, locator: _Locator, where: str):
    value = section.get(key, default)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError):
        label = f"{where}.{key}" if where else key
        raise ConfigError(f"{label} must be a {kind.__name__} (got {value!r})", line=locator.line_of(where, key)) from None


def _tree_params(raw: Mapping[str, Any], locator: _Locator, where: str) -> TreeParams:
    return TreeParams(
        min_node_size=_number(raw, "min_node_size", 5, int, locator, where),
        min_dev_fraction=_number(raw, "min_dev_fraction", 1e-4, float, locator, where),
        absolute_min_dev=_number(raw, "absolute_min_dev", None, float, locator, where),
    )


def _relative(base: Optional[Path], value: Optional[str]) -> Optional[Path]:
    if value is None:
        return None
    path = Path(value)
    if path.is_absolute() or base is None:
        return path
    # relative data paths resolve against the working directory first, then the config's folder
    return path if path.exists() else base.parent / path


def _parse(raw: Mapping[str, Any], locator: _Locator, source: Optional[Path]) -> RunConfig:
    unknown = [key for key in raw if key not in TOP_LEVEL]
    if unknown:
        raise ConfigError(f"unknown config key '{unknown[0]}'", line=locator.line_of(unknown[0]))

    data = _section(raw, "data", locator)
    plan = _section(raw, "plan", locator)
    scenario = _section(raw, "scenario", locator)
    regions = _section(raw, "regions", locator)
    experiment = _section(raw, "experiment", locator)
    population = _section(raw, "population", locator)

    try:
        plan_settings = PlanSettings(
            attributes=tuple(plan.get("attributes", ())),
            latitude_first=bool(plan.get("latitude_first", False)),
            h=_number(plan, "h", 1.0, float, locator, "plan"),
            h_attribute=_number(plan, "h_attribute", 2.0, float, locator, "plan"),
            m=_number(plan, "m", 5, int, locator, "plan"),
            tree_params=_tree_params(plan, locator, "plan"),
            tree_params_by_variable={
                name: _tree_params(values, locator, name)
                for name, values in dict(plan.get("tree_params_by_variable", {})).items()
            },
            per_record_bootstrap=bool(plan.get("per_record_bootstrap", False)),
            metadata_level=MetadataLevel.parse(plan.get("metadata_level", "RULES_ONLY")),
        )
    except (ConfigError, ValueError) as exc:
        line = getattr(exc, "line", None) or locator.line_of("plan")
        raise ConfigError(f"plan: {exc}", line=line) from None
    if plan_settings.m < 2:
        raise ConfigError(f"plan.m must be >= 2 (got {plan_settings.m})", line=locator.line_of("plan", "m"))
    if plan_settings.h < 0 or plan_settings.h_attribute < 0:
        raise ConfigError("bandwidths must be >= 0", line=locator.line_of("plan", "h"))

    try:
        extent = scenario.get("extent")
        prior = GeoPrior(
            kind=PriorKind(scenario.get("prior", PriorKind.UNIFORM_GRID.value)),
            window=_number(scenario, "window", 10.0, float, locator, "scenario"),
            nx=_number(scenario, "grid", 21, int, locator, "scenario"),
            ny=_number(scenario, "grid", 21, int, locator, "scenario"),
            extent=tuple(extent) if extent is not None else None,
        )
        knowledge = Knowledge(str(scenario.get("knowledge", "high")).lower())
        if "metadata_level" in scenario:
            intruder_level = MetadataLevel.parse(scenario["metadata_level"])
        else:
            # the intruder sees what the plan discloses; HIGH attacks need at least the rules
            intruder_level = plan_settings.metadata_level
            if knowledge is Knowledge.HIGH:
                intruder_level = max(intruder_level, MetadataLevel.RULES_ONLY)
        intruder = IntruderScenario(
            knowledge=knowledge,
            metadata_level=intruder_level,
            prior=prior,
            known_quasi_identifiers=tuple(scenario.get("quasi_identifiers", ())),
            sample_membership_known=bool(scenario.get("membership_known", False)),
        )
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}", line=locator.line_of("scenario")) from None

    try:
        region_settings = RegionSettings(
            kind=str(regions.get("kind", "grid")),
            nx=_number(regions, "nx", 4, int, locator, "regions"),
            ny=_number(regions, "ny", 4, int, locator, "regions"),
            extent=tuple(regions.get("extent", (1.0, 100.0, 1.0, 100.0))),
            polygons=_relative(source, regions.get("polygons")),
        )
        if region_settings.kind not in ("grid", "polygons"):
            raise ConfigError(f"regions.kind must be 'grid' or 'polygons' (got '{region_settings.kind}')")
    except ConfigError as exc:
        raise ConfigError(str(exc), line=locator.line_of("regions", "kind")) from None

    try:
        estimands = tuple(Estimand.parse(text) for text in experiment.get("estimands", ()))
    except ConfigError as exc:
        raise ConfigError(str(exc), line=locator.line_of("experiment", "estimands")) from None
    experiment_settings = ExperimentSettings(
        reps=_number(experiment, "reps", 100, int, locator, "experiment"),
        test_fraction=_number(experiment, "test_fraction", 0.075, float, locator, "experiment"),
        estimands=estimands,
        outcome=str(experiment.get("outcome", "outcome")),
        predictors=tuple(experiment.get("predictors", ("sex", "race", "age"))),
        mc_draws=_number(experiment, "mc_draws", 50, int, locator, "experiment"),
        noise_reps=_number(experiment, "noise_reps", 100, int, locator, "experiment"),
    )
    if experiment_settings.reps < 1 or experiment_settings.mc_draws < 1 or experiment_settings.noise_reps < 1:
        raise ConfigError("experiment reps, noise_reps and mc_draws must be >= 1", line=locator.line_of("experiment"))
    if not 0.0 < experiment_settings.test_fraction < 1.0:
        raise ConfigError("experiment.test_fraction must be in (0, 1)", line=locator.line_of("experiment", "test_fraction"))

    try:
        outcome = dict(population.get("outcome", {}))
        gp = GpSpec(**dict(outcome.pop("gp", {})))
        clusters = population.get("clusters")
        population_settings = PopulationSettings(
            n=_number(population, "n", 2000, int, locator, "population"),
            clusters=tuple(ClusterSpec.from_dict(c) for c in clusters) if clusters else None,
            outcome=SurrogateOutcomeSpec(gp=gp, **outcome),
        )
    except (ConfigError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"population: {exc}", line=locator.line_of("population")) from None
    if population_settings.n < 1:
        raise ConfigError("population.n must be >= 1", line=locator.line_of("population", "n"))

    seed = _number(raw, "seed", 0, int, locator, "")
    if seed < 0:
        raise ConfigError(f"seed must be >= 0 (got {seed})", line=locator.line_of("seed"))
    workers = _number(raw, "workers", os.cpu_count() or 1, int, locator, "")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1 (got {workers})", line=locator.line_of("workers"))

    return RunConfig(
        name=str(raw.get("name", "run")),
        description=str(raw.get("description", "")),
        source=source,
        input_path=_relative(source, data.get("input")),
        schema_path=_relative(source, data.get("schema")),
        recode=bool(data.get("recode", True)),
        plan=plan_settings,
        scenario=intruder,
        regions=region_settings,
        experiment=experiment_settings,
        population=population_settings,
        output_dir=Path(raw.get("output_dir", "output")),
        seed=seed,
        workers=workers,
        raw=dict(raw),
    )


OVERRIDES = {
    "seed": ("seed",),
    "out": ("output_dir",),
    "workers": ("workers",),
    "m": ("plan", "m"),
    "h": ("plan", "h"),
    "h_attribute": ("plan", "h_attribute"),
    "latitude_first": ("plan", "latitude_first"),
    "metadata_level": ("plan", "metadata_level"),
    "input": ("data", "input"),
    "knowledge": ("scenario", "knowledge"),
    "scenario_metadata_level": ("scenario", "metadata_level"),
    "mc_draws": ("experiment", "mc_draws"),
    "reps": ("experiment", "reps"),
    "n": ("population", "n"),
}


def _merge_overrides(raw: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = json.loads(json.dumps(raw))
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in OVERRIDES:
            raise ConfigError(f"unknown override '{key}'")
        path = OVERRIDES[key]
        target = merged
        for part in path[:-1]:
            target = target.setdefault(part, {})
        target[path[-1]] = str(value) if isinstance(value, Path) else value
    return merged


def load_run_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Load a run configuration from JSON.

    Args:
        path: JSON config file (built-in defaults when None)
        overrides: Command-line values keyed by flag name (None entries ignored)

    Returns:
        Validated RunConfig
    """
    text = "{}"
    source = None
    if path is not None:
        source = Path(path)
        try:
            text = source.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", line=1)

    merged = _merge_overrides(raw, overrides or {})
    config = _parse(merged, _Locator(text), source)
    validate_against_schema(config, _Locator(text))
    return config


def validate_against_schema(config: RunConfig, locator: Optional[_Locator] = None) -> Optional[Schema]:
    """
    Check that every variable the config names exists in the data schema.

    Skipped (returns None) when the config has no input data or no schema file yet.
    """
    locator = locator or _Locator("")
    schema_path = config.resolved_schema_path()
    if schema_path is None or not schema_path.exists():
        return None
    schema = load_schema(schema_path)
    checks: List[Tuple[str, Tuple[str, ...]]] = [
        ("attributes", config.plan.attributes),
        ("quasi_identifiers", config.scenario.known_quasi_identifiers),
        ("tree_params_by_variable", tuple(config.plan.tree_params_by_variable)),
    ]
    for key, names in checks:
        for name in names:
            if name not in schema:
                raise ConfigError(f"'{name}' in {key} is not a variable of {schema_path.name}", line=locator.line_of(key))
    for estimand in config.experiment.estimands:
        if estimand.variable not in schema:
            raise ConfigError(f"estimand variable '{estimand.variable}' is not in the schema", line=locator.line_of("estimands"))
    try:
        config.plan.build(schema, config.seed)
    except ConfigError as exc:
        raise ConfigError(str(exc), line=exc.line or locator.line_of("plan")) from None
    return schema


def preset_path(name: str) -> Path:
    """Path of a bundled preset by file stem (e.g. 'geography_only')."""
    path = CONFIG_DIR / f"{name}.json"
    if not path.exists():
        choices = ", ".join(sorted(p.stem for p in CONFIG_DIR.glob("*.json")))
        raise ConfigError(f"no preset named '{name}' (available: {choices})")
    return path


def get_config_info(config_path: str) -> Dict[str, Any]:
    """
    Get metadata about a config without validating its data files.

    Args:
        config_path: Path to JSON config file

    Returns:
        Dictionary with config metadata
    """
    with open(config_path, "r", encoding="utf-8") as f:
        config = json.load(f)

    plan = config.get("plan", {})
    return {
        "name": config.get("name", "Unknown"),
        "description": config.get("description", "No description"),
        "attributes": list(plan.get("attributes", [])),
        "m": plan.get("m", 5),
        "h": plan.get("h", 1.0),
        "metadata_level": plan.get("metadata_level", "RULES_ONLY"),
        "knowledge": config.get("scenario", {}).get("knowledge", "high"),
        "population_n": config.get("population", {}).get("n", 2000),
        "has_input": "input" in config.get("data", {}),
    }
