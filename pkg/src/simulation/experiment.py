"""
Utility Experiment
Repeated-sampling comparison of synthetic releases against the original and a noise-addition baseline.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.cart.export import MetadataLevel
from src.data.regions import RegionMap
from src.data.schema import Dataset
from src.risk.geography import assess_geo_risk
from src.risk.scenario import IntruderScenario, Knowledge
from src.synthesis.plan import SynthesisPlan
from src.synthesis.synthesizer import SyntheticRelease, generate_release
from src.utility.comparisons import (
    Estimand,
    count_large_mse,
    descriptive_comparison,
    regression_report,
    scatter_frame,
    split_train_test,
)
from src.utility.noise import add_geographic_noise
from src.utility.outcome import SurrogateOutcomeSpec, attach_outcome, generate_surrogate_outcome
from src.utility.population import simulate_population
from src.utils.logger import get_logger

logger = get_logger(__name__)

# independent RNG streams per purpose, all derived from the run seed
_POPULATION_STREAM = 0
_OUTCOME_STREAM = 1
_SPLIT_STREAM = 2
_NOISE_STREAM = 3


@dataclass
class ExperimentResult:
    """Everything one experiment run produces."""

    descriptive: pd.DataFrame
    coefficients: pd.DataFrame
    misclassification: pd.DataFrame
    scatter: pd.DataFrame
    large_mse: int
    reps: int
    noise_descriptive: Optional[pd.DataFrame] = None
    noise_large_mse: Optional[int] = None
    r1: Optional[np.ndarray] = None
    clipped: int = 0
    releases: List[SyntheticRelease] = field(default_factory=list, repr=False)


def simulated_original(
    n: int,
    seed: int,
    outcome: Optional[SurrogateOutcomeSpec] = None,
    clusters=None,
) -> Dataset:
    """
    Simulated population with the surrogate outcome attached.

    Args:
        n: Population size
        seed: Run seed
        outcome: Outcome model (default coefficients and field when None)
        clusters: Neighborhood mixture

    Returns:
        Dataset with the population columns plus 'outcome'
    """
    population = simulate_population(n, clusters, np.random.default_rng([seed, _POPULATION_STREAM]))
    spec = outcome or SurrogateOutcomeSpec()
    y = generate_surrogate_outcome(population, spec, np.random.default_rng([seed, _OUTCOME_STREAM]))
    return attach_outcome(population, y)


class UtilityExperiment:
    """
    Runs synthesis `reps` times on a fixed original and scores the releases.

    Features:
    - Descriptive estimands per region (median and MSE of the combined estimate)
    - Logistic regression comparison with misclassification rates
    - Noise-addition baseline at matched per-record R1
    - Original versus synthetic coordinate pairs for plotting
    """

    def __init__(
        self,
        original: Dataset,
        plan: SynthesisPlan,
        region_map: Optional[RegionMap],
        estimands: Sequence[Estimand],
        reps: int = 100,
        outcome: str = "outcome",
        predictors: Sequence[str] = ("sex", "race", "age"),
        test_fraction: float = 0.075,
        metadata_level: MetadataLevel = MetadataLevel.RULES_ONLY,
        workers: Optional[int] = None,
    ):
        """
        Initialize the experiment.

        Args:
            original: Original data (with the outcome column for regressions)
            plan: Synthesis plan; replicate seeds derive from plan.seed and the rep index
            region_map: Regions for descriptive estimands (None for the whole map only)
            estimands: Descriptive quantities
            reps: Number of independent releases
            outcome: Binary outcome column
            predictors: Regression main effects
            test_fraction: Held-out share for out-of-sample misclassification
            metadata_level: Disclosure level recorded on each release
            workers: Thread count for the rep pool
        """
        if reps < 1:
            raise ValueError(f"reps must be >= 1 (got {reps})")
        self.original = original
        self.plan = plan
        self.region_map = region_map
        self.estimands = list(estimands)
        self.reps = reps
        self.outcome = outcome
        self.predictors = list(predictors)
        self.test_fraction = test_fraction
        self.metadata_level = metadata_level
        self.workers = workers

        self.test_mask = split_train_test(
            original.n, test_fraction, np.random.default_rng([plan.seed, _SPLIT_STREAM])
        )

    def _release(self, rep: int) -> SyntheticRelease:
        plan = replace(self.plan, seed=self.plan.seed * 1_000_003 + rep)
        return generate_release(self.original, plan, self.metadata_level, workers=1)

    def synthesize(self) -> List[SyntheticRelease]:
        """All releases, rep r drawn from seed (plan.seed, r); order is rep order."""
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            releases = list(pool.map(self._release, range(self.reps)))
        logger.info(f"Generated {self.reps} releases of m={self.plan.m}")
        return releases

    def _has_regression(self) -> bool:
        names = [self.outcome] + self.predictors
        return all(name in self.original.schema for name in names)

    def per_record_r1(self, release: SyntheticRelease, scenario: Optional[IntruderScenario] = None) -> np.ndarray:
        """HIGH-knowledge R1 for every record, aligned with original rows."""
        scenario = scenario or IntruderScenario(knowledge=Knowledge.HIGH, metadata_level=MetadataLevel.RULES_ONLY)
        risk = assess_geo_risk(release, self.original, scenario, workers=self.workers)
        return risk["r1"].to_numpy()

    def noise_baseline(self, r1: np.ndarray, reps: int, extent=(1.0, 100.0, 1.0, 100.0)):
        """
        Score `reps` independently noised copies of the original.

        Returns:
            (descriptive frame, noised datasets, total clipped coordinates)
        """
        rng = np.random.default_rng([self.plan.seed, _NOISE_STREAM])
        noised = []
        clipped = 0
        for _ in range(reps):
            result = add_geographic_noise(self.original, r1, rng, extent)
            noised.append(result.dataset)
            clipped += result.clipped_count
        report = descriptive_comparison(self.original, noised, self.region_map, self.estimands)
        return report, noised, clipped

    def run(
        self,
        noise: bool = False,
        noise_reps: int = 100,
        r1: Optional[np.ndarray] = None,
        verbose: bool = True,
    ) -> ExperimentResult:
        """
        Run the experiment.

        Args:
            noise: Also run the noise-addition baseline
            noise_reps: Noised datasets for the baseline
            r1: Per-record R1 for the baseline (computed from the first release when None)
            verbose: Print the summary

        Returns:
            ExperimentResult
        """
        if verbose:
            print(f"Starting experiment: {self.reps} releases of m={self.plan.m}, synthesizing {list(self.plan.order)}")
            print(f"Original data: {self.original.n} records")
            print("-" * 80)

        releases = self.synthesize()
        descriptive = descriptive_comparison(self.original, releases, self.region_map, self.estimands)
        large = count_large_mse(descriptive)

        variants: Dict[str, object] = {"synthetic": releases[0]}
        noise_report = None
        noise_large = None
        clipped = 0
        if noise:
            if r1 is None:
                r1 = self.per_record_r1(releases[0])
            noise_report, noised, clipped = self.noise_baseline(r1, noise_reps)
            noise_large = count_large_mse(noise_report)
            variants["noise"] = noised[0]

        if self._has_regression():
            coefficients, rates = regression_report(
                self.original, variants, self.outcome, self.predictors, self.test_mask
            )
        else:
            logger.warning(f"Skipping regression comparison: '{self.outcome}' or a predictor is not in the data")
            coefficients = pd.DataFrame(columns=["variant", "coefficient", "estimate", "se"])
            rates = pd.DataFrame(columns=["variant", "in_sample", "out_of_sample"])

        color = "race" if "race" in self.original.schema else None
        scatter = scatter_frame(self.original, releases[0].datasets[0], color=color)

        if verbose:
            print("-" * 80)
            print("Experiment complete!")

        result = ExperimentResult(
            descriptive=descriptive,
            coefficients=coefficients,
            misclassification=rates,
            scatter=scatter,
            large_mse=large,
            reps=self.reps,
            noise_descriptive=noise_report,
            noise_large_mse=noise_large,
            r1=r1,
            clipped=clipped,
            releases=releases,
        )
        if verbose:
            self._print_summary(result)
        return result

    def _print_summary(self, result: ExperimentResult) -> None:
        """Print summary statistics from the experiment."""
        print("\n" + "=" * 80)
        print("UTILITY SUMMARY")
        print("=" * 80)

        print(f"\nReleases: {result.reps} x m={self.plan.m}, synthesized {list(self.plan.order)}")
        whole = result.descriptive[result.descriptive["region"] == "all"]
        if len(whole):
            print("\nWhole-map estimands (original | median | MSE):")
            for _, row in whole.iterrows():
                print(f"  {row['estimand']:<28} {row['q_original']:>9.3f} | {row['median']:>9.3f} | {row['mse']:.4f}")
        flagged = int(result.descriptive["flagged_reps"].sum()) if len(result.descriptive) else 0
        print(f"\nRegional percentage estimands with MSE > 3: {result.large_mse}")
        if flagged:
            print(f"  Flagged (region too small in a replicate): {flagged}")

        if result.noise_large_mse is not None:
            print("\nNoise baseline:")
            print(f"  Regional percentage estimands with MSE > 3: {result.noise_large_mse}")
            print(f"  Median per-record R1:             {float(np.median(result.r1)):.3f}")
            print(f"  Coordinates clipped to the map:   {result.clipped}")

        if len(result.misclassification):
            print("\nMisclassification (in sample | out of sample):")
            for _, row in result.misclassification.iterrows():
                print(f"  {row['variant']:<12} {row['in_sample']:.3f} | {row['out_of_sample']:.3f}")

        print("=" * 80 + "\n")
