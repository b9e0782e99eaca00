"""
Repeated-sampling checks on simulated populations.

These reproduce the direction of the published risk and utility findings on
generated data rather than exact values. All are slow.
"""

import numpy as np
import pytest
from scipy.stats import truncnorm

from src.cart.export import MetadataLevel
from src.data.regions import GridRegionMap
from src.inference.combining import combine
from src.inference.estimators import RegionFilter, estimate_mean, fit_logistic
from src.risk.geography import assess_geo_risk
from src.risk.identification import assess_identification_risk
from src.risk.scenario import IntruderScenario, Knowledge
from src.simulation.experiment import UtilityExperiment, simulated_original
from src.synthesis.plan import default_plan
from src.synthesis.synthesizer import generate_release
from src.utility.comparisons import Estimand
from src.utility.outcome import SurrogateOutcomeSpec
from src.utility.population import ClusterSpec, simulate_population

pytestmark = pytest.mark.slow

SEEDS = (1, 2, 3)
N = 2000
QUASI_IDENTIFIERS = ("lon", "lat", "sex", "race", "marital", "age")
LEVELS = (MetadataLevel.FULL, MetadataLevel.RULES_ONLY, MetadataLevel.EMPTY)


def _match_risk(release, original, level):
    scenario = IntruderScenario(
        knowledge=Knowledge.LOW,
        metadata_level=level,
        known_quasi_identifiers=QUASI_IDENTIFIERS,
        sample_membership_known=True,
    )
    _, summary = assess_identification_risk(release, original, scenario, mc_draws=20, seed=7)
    return summary


@pytest.mark.parametrize("seed", SEEDS)
def test_identification_risk_drops_with_more_synthesis_and_less_metadata(seed):
    original = simulated_original(N, seed)
    by_attributes = {}
    for attributes in ((), ("age", "race")):
        plan = default_plan(original.schema, attributes=attributes, h_geo=1.0, m=5, seed=seed)
        release = generate_release(original, plan, MetadataLevel.FULL)
        by_attributes[attributes] = {level: _match_risk(release, original, level) for level in LEVELS}

    geography_only = by_attributes[()]
    with_attributes = by_attributes[("age", "race")]
    for level in LEVELS:
        assert with_attributes[level].true_rate < geography_only[level].true_rate

    # Monte Carlo slack on a monotone trend
    for risks in (geography_only, with_attributes):
        expected = [risks[level].expected for level in LEVELS]
        assert expected[0] >= expected[1] - 0.01
        assert expected[1] >= expected[2] - 0.01


def test_geography_risk_grows_as_bandwidth_shrinks():
    original = simulated_original(N, 1)
    targets = np.sort(np.random.default_rng(5).choice(original.record_ids, size=150, replace=False))
    scenario = IntruderScenario(knowledge=Knowledge.HIGH, metadata_level=MetadataLevel.RULES_ONLY)

    median_r1 = {}
    for h in (10.0, 5.0, 1.0):
        plan = default_plan(original.schema, h_geo=h, m=5, seed=1)
        release = generate_release(original, plan)
        median_r1[h] = assess_geo_risk(release, original, scenario, targets)["r1"].median()

    assert median_r1[10.0] >= median_r1[5.0] >= median_r1[1.0]


def test_age_coefficient_attenuates_with_bandwidth():
    outcome = SurrogateOutcomeSpec(intercept=-3.5, coef_age=0.05, spatial=False)
    original = simulated_original(N, 2, outcome=outcome)
    predictors = ["sex", "race", "age"]

    medians = {}
    for h in (1.0, 5.0, 10.0):
        magnitudes = []
        for rep in range(20):
            plan = default_plan(original.schema, attributes=("age",), h_geo=h, h_attribute=h, m=2, seed=rep)
            release = generate_release(original, plan)
            per_dataset = []
            for ds in release.datasets:
                estimates = fit_logistic(ds, "outcome", predictors)
                per_dataset.append(next(e for e in estimates if e.label == "age"))
            magnitudes.append(abs(combine(per_dataset).q_bar))
        medians[h] = float(np.median(magnitudes))

    assert medians[1.0] >= medians[5.0] >= medians[10.0]


def test_regional_mean_intervals_cover_the_population_mean():
    # age does not depend on location, so the population mean of any region is the
    # mean of the truncated age distribution
    cluster = ClusterSpec(1.0, (50.0, 50.0), (20.0, 20.0), share_black=0.3, age_mean=60.0, age_sd=10.0)
    truth = truncnorm.mean((18.0 - 60.0) / 10.0, (99.0 - 60.0) / 10.0, loc=60.0, scale=10.0)
    west = RegionFilter(GridRegionMap(2, 1), "r00")

    covered = 0
    for rep in range(100):
        original = simulate_population(1000, (cluster,), np.random.default_rng([rep, 0]))
        plan = default_plan(original.schema, m=5, seed=rep)
        release = generate_release(original, plan, workers=1)
        estimate = combine([estimate_mean(ds, "age", west) for ds in release.datasets])
        lower, upper = estimate.ci(0.95)
        covered += int(lower <= truth <= upper)

    assert covered >= 88


def test_noise_baseline_is_no_better_than_synthesis_at_matched_risk():
    # tight neighborhoods, one per quadrant, with distinct racial and educational make-up
    clusters = (
        ClusterSpec(0.25, (25.0, 25.0), (6.0, 6.0), share_black=0.9, educ=(0.7, 0.2, 0.1)),
        ClusterSpec(0.25, (75.0, 75.0), (6.0, 6.0), share_black=0.1, educ=(0.1, 0.3, 0.6)),
        ClusterSpec(0.25, (75.0, 25.0), (6.0, 6.0), share_black=0.5, educ=(0.3, 0.5, 0.2)),
        ClusterSpec(0.25, (25.0, 75.0), (6.0, 6.0), share_black=0.2, educ=(0.2, 0.4, 0.4)),
    )
    estimands = [Estimand.parse("proportion:race=black"), Estimand.parse("proportion:educ=college")]

    holds = 0
    for seed in SEEDS:
        original = simulated_original(N, seed, clusters=clusters)
        plan = default_plan(original.schema, h_geo=1.0, m=5, seed=seed)
        experiment = UtilityExperiment(original, plan, GridRegionMap(2, 2), estimands, reps=20)
        result = experiment.run(noise=True, noise_reps=20, verbose=False)
        holds += int(result.noise_large_mse >= result.large_mse)

    assert holds >= 2
