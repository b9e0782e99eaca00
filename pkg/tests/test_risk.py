"""Tests for geography recovery and identification risk."""

import itertools
import math

import numpy as np
import pytest
from scipy import stats

from src.cart import MetadataLevel, TreeParams
from src.errors import ConfigError
from src.risk import (
    GeoPosterior,
    GeoPrior,
    IntruderScenario,
    Knowledge,
    assess_geo_risk,
    assess_identification_risk,
    geo_posterior,
    geo_risk,
    match_probabilities,
    match_risk_summary,
    summarize_geo_risk,
    summary_from_counts,
)
from src.synthesis import SynthesisPlan, SyntheticRelease, default_plan, generate_release
from tests.conftest import make_dataset


def _points(*coords):
    coords = np.asarray(coords, dtype=float)
    return make_dataset({"lon": coords[:, 0], "lat": coords[:, 1]})


def test_two_point_posterior_r1():
    original = _points((0.0, 0.0), (1.0, 1.0), (10.0, 10.0))
    posterior = GeoPosterior(np.array([[3.0, 0.0], [0.0, 4.0]]), np.array([0.5, 0.5]))
    record = geo_risk(posterior, (0.0, 0.0), original)
    assert record.r1 == pytest.approx(math.sqrt(12.5))
    assert record.r2 == 2


def test_point_mass_at_truth():
    original = _points((5.0, 5.0), (5.0, 5.0), (6.0, 5.0))
    posterior = GeoPosterior(np.array([[5.0, 5.0]]), np.array([1.0]))
    record = geo_risk(posterior, (5.0, 5.0), original)
    assert record.r1 == 0.0
    assert record.r2 == 2


def test_posterior_weights_are_normalized():
    posterior = GeoPosterior(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([2.0, 6.0]))
    assert posterior.weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(posterior.mean(), [0.75, 0.75])
    with pytest.raises(ValueError):
        GeoPosterior(np.empty((0, 2)), np.empty(0))


def test_high_knowledge_needs_rules():
    with pytest.raises(ConfigError):
        IntruderScenario(knowledge=Knowledge.HIGH, metadata_level=MetadataLevel.EMPTY)
    IntruderScenario(knowledge=Knowledge.LOW, metadata_level=MetadataLevel.EMPTY)
    with pytest.raises(ConfigError):
        GeoPrior(window=0.0)


def test_prior_grid_is_centered_on_the_target():
    grid = GeoPrior(window=10.0, nx=3, ny=3).grid((50.0, 40.0))
    assert len(grid) == 9
    assert grid[:, 0].min() == 45.0 and grid[:, 0].max() == 55.0
    assert grid[:, 1].min() == 35.0 and grid[:, 1].max() == 45.0


def _oracle_density(y, atoms, h):
    lo, hi = atoms.min(), atoms.max()
    a, b = (lo - atoms) / h, (hi - atoms) / h
    return stats.truncnorm.pdf(y, a, b, loc=atoms, scale=h).mean()


def test_high_posterior_matches_brute_force_on_root_only_trees():
    rng = np.random.default_rng(11)
    coords = rng.uniform(20.0, 80.0, size=(20, 2))
    original = make_dataset({"lon": coords[:, 0], "lat": coords[:, 1]})
    plan = default_plan(original.schema, h_geo=2.0, m=2, seed=4, tree_params=TreeParams(min_node_size=1000))
    release = generate_release(original, plan, MetadataLevel.RULES_ONLY)
    release = SyntheticRelease(
        datasets=release.datasets[:1],
        plan=release.plan,
        metadata_level=release.metadata_level,
        trees=release.trees,
        node_ids=release.node_ids[:1],
    )
    assert all(len(tree.nodes) == 1 for tree in release.trees.values())

    prior = GeoPrior(window=10.0, nx=5, ny=2)
    scenario = IntruderScenario(knowledge=Knowledge.HIGH, metadata_level=MetadataLevel.RULES_ONLY, prior=prior)
    target = 3
    posterior = geo_posterior(release, original, target, scenario)

    others = np.delete(coords, target, axis=0)
    synth = release.datasets[0].coords()[target]
    expected = []
    for candidate in prior.grid(tuple(coords[target])):
        density_lon = _oracle_density(synth[0], np.append(others[:, 0], candidate[0]), 2.0)
        density_lat = _oracle_density(synth[1], np.append(others[:, 1], candidate[1]), 2.0)
        expected.append(density_lon * density_lat)
    expected = np.array(expected) / np.sum(expected)
    np.testing.assert_allclose(posterior.weights, expected, rtol=1e-6)


def test_low_posterior_with_zero_bandwidth_uses_synthetic_points(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, h_geo=0.0, m=3, seed=2)
    release = generate_release(clustered_dataset, plan)
    scenario = IntruderScenario(knowledge=Knowledge.LOW)
    posterior = geo_posterior(release, clustered_dataset, 0, scenario)
    points = np.array([synth.coords()[0] for synth in release.datasets])
    np.testing.assert_allclose(posterior.support, points)
    np.testing.assert_allclose(posterior.weights, 1.0 / 3.0)


def test_low_posterior_concentrates_on_identical_points(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, h_geo=0.01, m=5, seed=2)
    release = generate_release(clustered_dataset, plan)
    same = release.datasets[0]
    release.datasets[:] = [same] * 5
    posterior = geo_posterior(release, clustered_dataset, 7, IntruderScenario(knowledge=Knowledge.LOW))
    distance = np.linalg.norm(posterior.mean() - same.coords()[7])
    assert distance < 0.05


def test_prior_that_excludes_the_truth(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, m=2, seed=2)
    release = generate_release(clustered_dataset, plan)
    prior = GeoPrior(nx=4, ny=4, extent=(1.0, 10.0, 1.0, 10.0))
    scenario = IntruderScenario(knowledge=Knowledge.HIGH, prior=prior)
    target = 250
    truth = clustered_dataset.coords()[target]
    posterior = geo_posterior(release, clustered_dataset, target, scenario)
    assert not np.any(np.all(np.isclose(posterior.support, truth), axis=1))
    assert posterior.weights.sum() == pytest.approx(1.0)


def test_assess_geo_risk_frame(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, m=2, seed=8)
    release = generate_release(clustered_dataset, plan)
    scenario = IntruderScenario(knowledge=Knowledge.HIGH, prior=GeoPrior(nx=7, ny=7))
    frame = assess_geo_risk(release, clustered_dataset, scenario, targets=range(0, 300, 30), workers=2)
    assert list(frame.columns) == ["record_id", "r1", "r2", "degenerate", "scenario"]
    assert list(frame["record_id"]) == list(range(0, 300, 30))
    assert (frame["r1"] >= 0).all()
    assert (frame["r1"] <= 100 * math.sqrt(2)).all()
    assert (frame["r2"] >= 1).all()
    assert (frame["scenario"] == "high/RULES_ONLY").all()

    summary = summarize_geo_risk(frame)
    assert len(summary) == 1
    assert summary.loc[0, "r1_a0"] <= summary.loc[0, "r1_a25"] <= summary.loc[0, "r1_a50"]


def test_risk_summary_formulas():
    summary = summary_from_counts([2, 1, 1, 3], [1, 1, 0, 0])
    assert summary.expected == pytest.approx(0.375)
    assert summary.true_rate == pytest.approx(0.25)
    assert summary.false_rate == pytest.approx(0.5)
    assert summary.targets == 4


def test_risk_summary_from_probabilities():
    probabilities = [
        np.array([0.5, 0.5, 0.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0, 0.0, 0.0]),
        np.array([0.0, 0.0, 1.0, 0.0, 0.0]),
        np.array([1 / 3, 1 / 3, 1 / 3, 0.0, 0.0]),
    ]
    summary = match_risk_summary(probabilities, [0, 1, 3, 3])
    assert (summary.expected, summary.true_rate, summary.false_rate) == pytest.approx((0.375, 0.25, 0.5))


def test_risk_summary_edge_cases():
    perfect = summary_from_counts([1, 1, 1], [1, 1, 1])
    assert (perfect.expected, perfect.true_rate, perfect.false_rate) == (1.0, 1.0, 0.0)
    ambiguous = summary_from_counts([4, 4, 4, 4], [1, 1, 1, 1])
    assert ambiguous.expected == pytest.approx(0.25)
    assert ambiguous.true_rate == 0.0
    assert ambiguous.false_rate is None
    outside = match_risk_summary([np.array([0.1, 0.1, 0.8])], [0])
    assert outside.expected == 0.0


def _exact_key_release(lon, lat, zone, age, m=2):
    ds = make_dataset({"lon": lon, "lat": lat, "zone": zone, "age": age}, levels={"zone": ["a", "b"]})
    plan = default_plan(ds.schema, m=m, seed=1, tree_params=TreeParams(min_node_size=2))
    return ds, generate_release(ds, plan)


def test_exact_match_on_unsynthesized_keys():
    n = 10
    lon = np.linspace(10, 90, n)
    lat = np.linspace(90, 10, n)
    zone = np.array(["a", "b"] * 5, dtype=object)
    age = np.arange(30.0, 30.0 + n)
    ds, release = _exact_key_release(lon, lat, zone, age)
    scenario = IntruderScenario(known_quasi_identifiers=("zone", "age"))

    probs = match_probabilities(release, {"zone": "b", "age": 37.0}, scenario, mc_draws=3)
    assert probs[7] == pytest.approx(1.0)
    assert probs.sum() == pytest.approx(1.0)

    missing = match_probabilities(release, {"zone": "a", "age": 99.0}, scenario, mc_draws=3)
    assert missing[-1] == 1.0
    known = IntruderScenario(known_quasi_identifiers=("zone", "age"), sample_membership_known=True)
    spread = match_probabilities(release, {"zone": "a", "age": 99.0}, known, mc_draws=3)
    np.testing.assert_allclose(spread[:-1], 1.0 / n)
    assert spread[-1] == 0.0

    with pytest.raises(ConfigError):
        match_probabilities(release, {"zone": "a"}, scenario)


def test_tied_records_share_the_match():
    lon = np.linspace(10, 90, 6)
    lat = np.linspace(10, 90, 6)
    zone = np.array(["a", "a", "b", "b", "a", "b"], dtype=object)
    age = np.array([40.0, 40.0, 41.0, 42.0, 43.0, 44.0])
    _, release = _exact_key_release(lon, lat, zone, age)
    scenario = IntruderScenario(known_quasi_identifiers=("zone", "age"))
    probs = match_probabilities(release, {"zone": "a", "age": 40.0}, scenario, mc_draws=2)
    assert probs[0] == pytest.approx(0.5)
    assert probs[1] == pytest.approx(0.5)


def test_own_value_imputation_matches_enumeration():
    first = np.array([[50.0, 52.0], [47.0, 50.0], [60.0, 60.0]])
    second = np.array([[70.0, 70.0], [51.5, 50.5], [49.0, 49.0]])
    datasets = [_points(*first), _points(*second)]
    release = SyntheticRelease(
        datasets=datasets,
        plan=SynthesisPlan(order=("lon", "lat"), m=2),
        metadata_level=MetadataLevel.EMPTY,
        trees={},
        node_ids=[{}, {}],
    )
    target = np.array([50.0, 50.0])
    scenario = IntruderScenario(
        knowledge=Knowledge.LOW, metadata_level=MetadataLevel.EMPTY, known_quasi_identifiers=("lon", "lat")
    )
    probs = match_probabilities(release, {"lon": 50.0, "lat": 50.0}, scenario, mc_draws=5000, seed=3)

    options = np.stack([first, second])  # (m, n, 2)
    exact = np.zeros(3)
    for choice in itertools.product(range(2), repeat=3):
        imputed = options[list(choice), np.arange(3)]
        distance = np.sum((imputed - target) ** 2, axis=1)
        winners = np.flatnonzero(distance == distance.min())
        exact[winners] += 1.0 / len(winners) / 8.0
    np.testing.assert_allclose(probs[:3], exact, atol=0.03)
    assert probs[-1] == 0.0


@pytest.mark.parametrize("level", [MetadataLevel.FULL, MetadataLevel.RULES_ONLY, MetadataLevel.EMPTY])
def test_assess_identification_risk(clustered_dataset, level):
    plan = default_plan(clustered_dataset.schema, attributes=["age"], m=2, seed=6)
    release = generate_release(clustered_dataset, plan, MetadataLevel.FULL)
    scenario = IntruderScenario(
        knowledge=Knowledge.LOW, metadata_level=level, known_quasi_identifiers=("lon", "lat", "zone", "age")
    )
    frame, summary = assess_identification_risk(
        release, clustered_dataset, scenario, mc_draws=4, seed=1, targets=range(0, 300, 10), workers=2
    )
    assert list(frame.columns) == ["record_id", "c", "g", "p_true", "p_outside"]
    assert len(frame) == 30
    assert (frame["p_outside"] == 0.0).all()
    assert 0.0 <= summary.expected <= 1.0
    assert 0.0 <= summary.true_rate <= 1.0
    assert summary.false_rate is None or 0.0 <= summary.false_rate <= 1.0


def test_identification_needs_keys(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, m=2, seed=6)
    release = generate_release(clustered_dataset, plan)
    with pytest.raises(ConfigError):
        match_probabilities(release, {}, IntruderScenario())
    with pytest.raises(ConfigError):
        match_probabilities(release, {"income": 1}, IntruderScenario(known_quasi_identifiers=("income",)))
