"""
Command-Line Interface
simulate, synth, risk geo, risk id, infer, utility and noise-baseline subcommands.
"""

import argparse
import hashlib
import json
import platform
import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy

sys.path.append(str(Path(__file__).parent.parent))

import src
from src.cart.export import MetadataLevel
from src.data.coords import CoordTransform, recode_coords
from src.data.csv_io import load_csv, write_csv, write_frame_csv
from src.data.schema import Dataset, VariableRole, load_schema
from src.errors import ConfigError, DataFileError, GeoSynthError
from src.inference.combining import combine, combine_by_label
from src.inference.estimators import RegionFilter, estimate_mean, estimate_proportion, fit_logistic
from src.risk.geography import assess_geo_risk, summarize_geo_risk
from src.risk.identification import assess_identification_risk
from src.risk.scenario import Knowledge
from src.scenarios.config_loader import RunConfig, load_run_config
from src.simulation.experiment import UtilityExperiment, simulated_original
from src.synthesis.plan import SynthesisPlan
from src.synthesis.release_io import load_release, write_release
from src.synthesis.synthesizer import SyntheticRelease, generate_release, rebuild_release
from src.utility.comparisons import Estimand
from src.utils.logger import configure_logging, get_logger

logger = get_logger(__name__)

MANIFEST_FILE = "manifest.json"
TRANSFORM_FILE = "coords.json"
POPULATION_FILE = "population.csv"


class Workspace:
    """
    Staging directory for one run's artifacts.

    Files are written under a hidden sibling of the output directory and moved
    into place only when the subcommand succeeds.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.parent.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=f".{self.out_dir.name}-", dir=self.out_dir.parent))

    def path(self, name: str) -> Path:
        return self.stage / name

    def table(self, frame: pd.DataFrame, name: str, categorical: Sequence[str] = ()) -> Path:
        """Report CSV with a schema sidecar; infinities are written as empty cells."""
        frame = frame.replace([np.inf, -np.inf], np.nan)
        return write_frame_csv(frame, self.path(name), categorical)

    def json(self, payload: Dict[str, Any], name: str) -> Path:
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    def commit(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for item in sorted(self.stage.iterdir()):
            target = self.out_dir / item.name
            if target.exists():
                target.unlink()
            shutil.move(str(item), str(target))
        shutil.rmtree(self.stage, ignore_errors=True)
        return self.out_dir

    def discard(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(config: RunConfig, subcommand: str, workspace: Workspace) -> Dict[str, Any]:
    files = sorted(p for p in workspace.stage.iterdir() if p.is_file())
    return {
        "subcommand": subcommand,
        "config": str(config.source) if config.source else None,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "package": {"name": "geosynth", "version": src.__version__},
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "scipy": scipy.__version__,
        },
        "files": {p.name: _sha256(p) for p in files},
    }


def _load_source(config: RunConfig) -> Tuple[Dataset, Optional[CoordTransform]]:
    """Original data, recoded onto [1, 100] unless the config turns recoding off."""
    if config.input_path is None:
        raise ConfigError("no input data: set data.input in the config or pass --input")
    schema_path = config.resolved_schema_path()
    schema = load_schema(schema_path) if schema_path is not None and schema_path.exists() else None
    original = load_csv(config.input_path, schema)
    if not config.recode:
        return original, None
    return recode_coords(original)


def _load_original(config: RunConfig) -> Dataset:
    return _load_source(config)[0]


def _plan(config: RunConfig, original: Dataset) -> SynthesisPlan:
    return config.plan.build(original.schema, config.seed)


def _loaded_release(config: RunConfig, original: Dataset, release_dir: Path) -> SyntheticRelease:
    """Read a release and reattach its trees by refitting on the original."""
    loaded = load_release(release_dir)
    if "plan" in loaded.metadata:
        try:
            plan = SynthesisPlan.from_dict(loaded.metadata["plan"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFileError(f"release metadata has an unreadable plan: {exc!r}") from None
    else:
        plan = replace(_plan(config, original), m=loaded.m, seed=int(loaded.metadata.get("seed", config.seed)))
        recorded = loaded.metadata.get("order")
        if recorded is not None and list(recorded) != list(plan.order):
            raise ConfigError(f"release synthesized {recorded} but the config plans {list(plan.order)}")
    for synth in loaded.datasets:
        if synth.n != original.n:
            raise ConfigError(f"release has {synth.n} records but the original has {original.n}")
    return rebuild_release(original, loaded.datasets, plan, loaded.metadata_level)


def _scenario_for(config: RunConfig, release: SyntheticRelease, knowledge: Optional[Knowledge] = None):
    scenario = config.scenario if knowledge is None else replace(config.scenario, knowledge=knowledge)
    if scenario.metadata_level > release.metadata_level:
        raise ConfigError(
            f"scenario assumes {scenario.metadata_level.name} metadata but the release disclosed "
            f"{release.metadata_level.name}"
        )
    return scenario


def _targets(original: Dataset, count: Optional[int], seed: int) -> Optional[np.ndarray]:
    if count is None or count >= original.n:
        return None
    rng = np.random.default_rng([seed, 11])
    return np.sort(rng.choice(original.record_ids, size=count, replace=False))


def _default_estimands(original: Dataset, outcome: str) -> List[Estimand]:
    estimands = []
    geography = set(original.schema.geography)
    for var in original.schema.variables:
        if var.name in geography or var.name == outcome:
            continue
        if var.is_continuous:
            estimands.append(Estimand("mean", var.name))
        else:
            for level in var.levels[1:]:
                estimands.append(Estimand("proportion", var.name, level))
    return estimands


def cmd_simulate(config: RunConfig, args: argparse.Namespace, workspace: Workspace) -> None:
    population = simulated_original(
        config.population.n, config.seed, config.population.outcome, config.population.clusters
    )
    write_csv(population, workspace.path(POPULATION_FILE))
    print(f"Simulated {population.n} records -> {config.output_dir / POPULATION_FILE}")


def cmd_synth(config: RunConfig, args: argparse.Namespace, workspace: Workspace) -> None:
    original, transform = _load_source(config)
    plan = _plan(config, original)
    release = generate_release(original, plan, config.plan.metadata_level, workers=config.workers)
    write_release(release, workspace.stage)
    if transform is not None:
        workspace.json(transform.to_dict(), TRANSFORM_FILE)
    print(f"Wrote {release.m} synthetic datasets ({list(plan.order)}) -> {config.output_dir}")


def cmd_risk_geo(config: RunConfig, args: argparse.Namespace, workspace: Workspace) -> None:
    original = _load_original(config)
    release = _loaded_release(config, original, Path(args.release))
    levels = [Knowledge.LOW, Knowledge.HIGH] if args.knowledge == "both" else [Knowledge(args.knowledge)]
    targets = _targets(original, args.targets, config.seed)
    frames = []
    for knowledge in levels:
        scenario = _scenario_for(config, release, knowledge)
        frames.append(assess_geo_risk(release, original, scenario, targets, workers=config.workers))
    records = pd.concat(frames, ignore_index=True)
    summary = summarize_geo_risk(records)
    workspace.table(records, "geo_risk.csv", categorical=["scenario", "degenerate"])
    workspace.table(summary, "geo_risk_summary.csv", categorical=["scenario"])
    print(summary.to_string(index=False))


def cmd_risk_id(config: RunConfig, args: argparse.Namespace, workspace: Workspace) -> None:
    original = _load_original(config)
    release = _loaded_release(config, original, Path(args.release))
    scenario = _scenario_for(config, release)
    if not scenario.known_quasi_identifiers:
        keys = tuple(var.name for var in original.schema.variables if var.role is not VariableRole.OUTCOME)
        scenario = replace(scenario, known_quasi_identifiers=keys)
    targets = _targets(original, args.targets, config.seed)
    frame, summary = assess_identification_risk(
        release,
        original,
        scenario,
        mc_draws=config.experiment.mc_draws,
        seed=config.seed,
        targets=targets,
        workers=config.workers,
    )
    row = {"scenario": scenario.describe(), **summary.to_dict()}
    workspace.table(frame, "id_risk.csv")
    workspace.table(pd.DataFrame([row]), "id_risk_summary.csv", categorical=["scenario"])
    print(pd.DataFrame([row]).to_string(index=False))


def cmd_infer(config: RunConfig, args: argparse.Namespace, workspace: Workspace) -> None:
    loaded = load_release(Path(args.release))
    region = None
    if args.region:
        region_map = config.regions.build()
        if args.region not in region_map.labels():
            raise ConfigError(f"unknown region '{args.region}' (have {', '.join(region_map.labels())})")
        region = RegionFilter(region_map, args.region)

    rows = []
    for text in args.estimand or ():
        estimand = Estimand.parse(text)
        if estimand.kind == "mean":
            estimates = [estimate_mean(ds, estimand.variable, region) for ds in loaded.datasets]
        else:
            estimates = [estimate_proportion(ds, estimand.variable, estimand.level, region) for ds in loaded.datasets]
        rows.append(combine(estimates, label=estimates[0].label).to_dict(args.level))
    if args.logistic:
        per_replicate = [fit_logistic(ds, args.logistic, args.predictors) for ds in loaded.datasets]
        rows.extend(c.to_dict(args.level) for c in combine_by_label(per_replicate))
    if not rows:
        raise ConfigError("infer needs at least one --estimand or --logistic")

    frame = pd.DataFrame(rows)
    frame.insert(1, "region", args.region or "all")
    workspace.table(frame, "inference.csv", categorical=["estimand", "region"])
    print(frame.to_string(index=False))


def _experiment(config: RunConfig) -> UtilityExperiment:
    if config.input_path is not None:
        original = _load_original(config)
    else:
        original = simulated_original(
            config.population.n, config.seed, config.population.outcome, config.population.clusters
        )
    estimands = list(config.experiment.estimands) or _default_estimands(original, config.experiment.outcome)
    return UtilityExperiment(
        original,
        _plan(config, original),
        config.regions.build(),
        estimands,
        reps=config.experiment.reps,
        outcome=config.experiment.outcome,
        predictors=config.experiment.predictors,
        test_fraction=config.experiment.test_fraction,
        metadata_level=config.plan.metadata_level,
        workers=config.workers,
    )


def _write_experiment(result, workspace: Workspace) -> None:
    workspace.table(result.descriptive, "descriptive.csv", categorical=["estimand", "region"])
    workspace.table(result.coefficients, "coefficients.csv", categorical=["variant", "coefficient"])
    workspace.table(result.misclassification, "misclassification.csv", categorical=["variant"])
    workspace.table(result.scatter, "scatter.csv")


def cmd_utility(config: RunConfig, args: argparse.Namespace, workspace: Workspace) -> None:
    result = _experiment(config).run()
    _write_experiment(result, workspace)


def cmd_noise_baseline(config: RunConfig, args: argparse.Namespace, workspace: Workspace) -> None:
    experiment = _experiment(config)
    r1 = None
    if args.r1:
        risk = load_csv(args.r1)
        frame = risk.frame
        if "scenario" in frame:
            frame = frame[frame["scenario"].str.startswith(Knowledge.HIGH.value)]
        frame = frame.assign(record_id=frame["record_id"].astype(np.int64))
        r1 = frame.set_index("record_id")["r1"].reindex(experiment.original.record_ids).to_numpy()
        if np.isnan(r1).any():
            raise ConfigError(f"{args.r1} lacks HIGH-scenario R1 for some records")
    result = experiment.run(noise=True, noise_reps=config.experiment.noise_reps, r1=r1)
    _write_experiment(result, workspace)
    workspace.table(result.noise_descriptive, "noise_descriptive.csv", categorical=["estimand", "region"])
    workspace.table(
        pd.DataFrame({"record_id": experiment.original.record_ids, "r1": result.r1}), "noise_r1.csv"
    )


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace, Workspace], None]] = {
    "simulate": cmd_simulate,
    "synth": cmd_synth,
    "risk geo": cmd_risk_geo,
    "risk id": cmd_risk_id,
    "infer": cmd_infer,
    "utility": cmd_utility,
    "noise-baseline": cmd_noise_baseline,
}


def _common(parser: argparse.ArgumentParser, data: bool = True) -> None:
    parser.add_argument("--config", help="JSON run configuration (bundled defaults when omitted)")
    parser.add_argument("--seed", type=int, help="Base seed for every random stream")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--workers", type=int, help="Thread pool size (default: available cores)")
    if data:
        parser.add_argument("--input", help="Original data CSV (schema read from its .schema.json sidecar)")


def _plan_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--m", type=int, help="Number of synthetic datasets")
    parser.add_argument("--h", type=float, help="Geography kernel bandwidth (recoded units)")
    parser.add_argument("--latitude-first", action="store_true", default=None, help="Synthesize latitude before longitude")
    parser.add_argument("--metadata-level", choices=[level.name for level in MetadataLevel], help="Disclosed metadata")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geosynth",
        description="Partially synthetic geography releases with disclosure risk and utility checks.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=1, help="More logging (-vv for debug)")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings only")
    commands = parser.add_subparsers(dest="command", metavar="<command>")
    commands.required = True

    simulate = commands.add_parser("simulate", help="Simulate a population with the surrogate outcome")
    _common(simulate, data=False)
    simulate.add_argument("--n", type=int, help="Population size")

    synth = commands.add_parser("synth", help="Generate a partially synthetic release")
    _common(synth)
    _plan_flags(synth)

    risk = commands.add_parser("risk", help="Disclosure risk of a release")
    attacks = risk.add_subparsers(dest="attack", metavar="<attack>")
    attacks.required = True
    geo = attacks.add_parser("geo", help="Geography recovery risk (R1, R2)")
    _common(geo)
    _plan_flags(geo)
    geo.add_argument("--release", required=True, help="Release directory")
    geo.add_argument("--knowledge", choices=["low", "high", "both"], default="high")
    geo.add_argument("--targets", type=int, help="Attack a seeded random subset of this many records")
    ident = attacks.add_parser("id", help="Re-identification risk")
    _common(ident)
    _plan_flags(ident)
    ident.add_argument("--release", required=True, help="Release directory")
    ident.add_argument("--mc-draws", type=int, help="Imputations per replicate")
    ident.add_argument("--targets", type=int, help="Attack a seeded random subset of this many records")

    infer = commands.add_parser("infer", help="Combined inference from a release")
    _common(infer, data=False)
    infer.add_argument("--release", required=True, help="Release directory")
    infer.add_argument("--estimand", action="append", help="mean:<var> or proportion:<var>=<level> (repeatable)")
    infer.add_argument("--region", help="Restrict to one region of the configured region map")
    infer.add_argument("--logistic", metavar="OUTCOME", help="Also fit a logistic regression of OUTCOME")
    infer.add_argument("--predictors", nargs="+", default=["sex", "race", "age"], help="Logistic main effects")
    infer.add_argument("--level", type=float, default=0.95, help="Interval coverage")

    utility = commands.add_parser("utility", help="Repeated-sampling utility comparison")
    _common(utility)
    _plan_flags(utility)
    utility.add_argument("--reps", type=int, help="Independent releases")
    utility.add_argument("--n", type=int, help="Simulated population size (without --input)")

    noise = commands.add_parser("noise-baseline", help="Utility of noise addition at matched R1")
    _common(noise)
    _plan_flags(noise)
    noise.add_argument("--reps", type=int, help="Independent releases")
    noise.add_argument("--n", type=int, help="Simulated population size (without --input)")
    noise.add_argument("--r1", help="geo_risk.csv supplying per-record HIGH-scenario R1")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    names = ("seed", "out", "workers", "m", "h", "latitude_first", "metadata_level", "input", "mc_draws", "reps", "n")
    out = {name: getattr(args, name, None) for name in names}
    knowledge = getattr(args, "knowledge", None)
    if knowledge in ("low", "high"):
        out["knowledge"] = knowledge
    if args.command == "risk":
        # on an existing release the flag sets what the intruder was told
        out["scenario_metadata_level"] = out.pop("metadata_level")
        if args.attack == "id":
            # record linkage does not use the geography knowledge setting
            out["knowledge"] = Knowledge.LOW.value
    return out


def run(config: RunConfig, subcommand: str, args: argparse.Namespace) -> Path:
    """
    Execute one subcommand and move its artifacts into the output directory.

    Partial outputs are removed when the subcommand fails.

    Returns:
        The output directory
    """
    handler = COMMANDS[subcommand]
    workspace = Workspace(config.output_dir)
    try:
        handler(config, args, workspace)
        workspace.json(_manifest(config, subcommand, workspace), MANIFEST_FILE)
    except BaseException:
        workspace.discard()
        raise
    out = workspace.commit()
    logger.info(f"{subcommand}: artifacts in {out}")
    return out


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(0 if args.quiet else args.verbose)
    subcommand = args.command if args.command != "risk" else f"risk {args.attack}"

    try:
        config = load_run_config(args.config, _overrides(args))
        run(config, subcommand, args)
    except ConfigError as exc:
        where = args.config or "config"
        prefix = f"{where}:{exc.line}: " if exc.line else f"{where}: " if args.config else ""
        print(f"error: {prefix}{exc}", file=sys.stderr)
        return 1
    except GeoSynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
