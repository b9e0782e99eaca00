"""Tests for leaf sampling, synthesis plans, release generation and release files."""

import json

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import ks_2samp

from src.cart import MetadataLevel, TreeParams, fit_tree
from src.data.schema import VariableRole
from src.errors import ConfigError
from src.synthesis import (
    SynthesisPlan,
    bayesian_bootstrap,
    bootstrap_weights,
    default_plan,
    generate_release,
    kernel_sample,
    kernel_sample_many,
    load_release,
    rebuild_release,
    synthesize_column,
    truncated_kernel_pdf,
    write_release,
)
from src.utility import simulate_population
from tests.conftest import make_dataset


@pytest.mark.parametrize("k", [2, 5, 20])
def test_bootstrap_weights_average_to_uniform(k):
    rng = np.random.default_rng(k)
    draws = np.array([bootstrap_weights(k, rng) for _ in range(4000)])
    assert np.allclose(draws.sum(axis=1), 1.0)
    assert (draws >= 0).all()
    np.testing.assert_allclose(draws.mean(axis=0), 1.0 / k, atol=0.02)


def test_bootstrap_returns_atoms():
    rng = np.random.default_rng(0)
    values = np.array([3.0, 7.0, 11.0])
    picks = bayesian_bootstrap(values, 500, rng)
    assert set(picks) <= set(values)
    assert bayesian_bootstrap(np.array([4.0]), 3, rng).tolist() == [4.0, 4.0, 4.0]
    with pytest.raises(ValueError):
        bootstrap_weights(0, rng)


def test_kernel_sample_mean_and_spread():
    rng = np.random.default_rng(1)
    draws = kernel_sample_many(np.full(20000, 50.0), 2.0, (1.0, 100.0), rng)
    assert draws.mean() == pytest.approx(50.0, abs=0.1)
    assert draws.std() == pytest.approx(2.0, rel=0.05)


def test_kernel_sample_stays_in_support():
    rng = np.random.default_rng(2)
    centers = rng.uniform(48.0, 51.0, size=5000)
    draws = kernel_sample_many(centers, 5.0, (48.0, 51.0), rng)
    assert draws.min() >= 48.0
    assert draws.max() <= 51.0


def test_kernel_sample_degenerate_cases():
    rng = np.random.default_rng(3)
    assert kernel_sample(42.0, 0.0, (1.0, 100.0), rng) == 42.0
    assert kernel_sample(7.0, 3.0, (7.0, 7.0), rng) == 7.0
    with pytest.raises(ValueError):
        kernel_sample(1.0, -1.0, (0.0, 2.0), rng)


def test_truncated_pdf_integrates_to_one():
    grid = np.linspace(10.0, 20.0, 20001)
    density = truncated_kernel_pdf(grid, 11.0, 2.0, (10.0, 20.0))
    assert trapezoid(density, grid) == pytest.approx(1.0, abs=1e-4)
    assert truncated_kernel_pdf(25.0, 11.0, 2.0, (10.0, 20.0)) == 0.0


def test_zero_bandwidth_and_singleton_leaves_reproduce_the_original(clustered_dataset):
    key = np.arange(clustered_dataset.n, dtype=float)
    ds = make_dataset(
        {
            "lon": clustered_dataset.column("lon"),
            "lat": clustered_dataset.column("lat"),
            "key": key,
        }
    )
    plan = default_plan(
        ds.schema, h_geo=0.0, m=2, seed=5, tree_params=TreeParams(min_node_size=1, absolute_min_dev=0.0)
    )
    release = generate_release(ds, plan)
    for synth in release.datasets:
        np.testing.assert_array_equal(synth.column("lon"), ds.column("lon"))
        np.testing.assert_array_equal(synth.column("lat"), ds.column("lat"))


def test_release_shape_and_untouched_columns(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, m=3, seed=9)
    release = generate_release(clustered_dataset, plan, MetadataLevel.FULL)
    assert release.m == 3
    for synth in release.datasets:
        assert synth.n == clustered_dataset.n
        np.testing.assert_array_equal(synth.record_ids, clustered_dataset.record_ids)
        np.testing.assert_array_equal(synth.column("zone"), clustered_dataset.column("zone"))
        np.testing.assert_array_equal(synth.column("age"), clustered_dataset.column("age"))
        assert synth.column("lon").min() >= clustered_dataset.column("lon").min()
        assert synth.column("lon").max() <= clustered_dataset.column("lon").max()
    assert not np.allclose(release.datasets[0].column("lon"), release.datasets[1].column("lon"))


def test_different_seeds_give_different_releases(clustered_dataset):
    first = generate_release(clustered_dataset, default_plan(clustered_dataset.schema, m=2, seed=1))
    second = generate_release(clustered_dataset, default_plan(clustered_dataset.schema, m=2, seed=2))
    for a, b in zip(first.datasets, second.datasets):
        assert not a.equals(b)


def test_pooled_synthetic_marginals_match_the_original():
    population = simulate_population(2000, rng=np.random.default_rng(17))
    plan = default_plan(population.schema, h_geo=1.0, m=5, seed=8)
    release = generate_release(population, plan)
    for name in ("lon", "lat"):
        pooled = np.concatenate([synth.column(name) for synth in release.datasets])
        assert ks_2samp(population.column(name), pooled).statistic <= 0.05


def test_root_only_tree_keeps_the_mean():
    rng = np.random.default_rng(12)
    age = rng.normal(50.0, 10.0, size=1000)
    ds = make_dataset({"lon": rng.uniform(1, 100, 1000), "lat": rng.uniform(1, 100, 1000), "age": age})
    tree = fit_tree(ds, "age", [], TreeParams())
    assert len(tree.leaves()) == 1
    draws = np.array(
        [
            synthesize_column(ds, "age", [], {}, 1.0, None, np.random.default_rng([4, l]), tree=tree)
            for l in range(20)
        ]
    )
    assert draws.min() >= age.min() and draws.max() <= age.max()
    standard_error = age.std(ddof=1) / np.sqrt(len(age))
    assert abs(draws.mean() - age.mean()) < 3 * standard_error


def test_release_is_deterministic_across_worker_counts(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, attributes=["age"], m=3, seed=21)
    one = generate_release(clustered_dataset, plan, workers=1)
    many = generate_release(clustered_dataset, plan, workers=4)
    for a, b in zip(one.datasets, many.datasets):
        assert a.equals(b)


def test_categorical_attribute_synthesis_keeps_levels(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, attributes=["zone"], m=2, seed=4)
    release = generate_release(clustered_dataset, plan)
    for synth in release.datasets:
        assert set(synth.column("zone")) <= {"a", "b", "c"}


def test_synthesize_column_uses_synthetic_predictors(clustered_dataset):
    rng = np.random.default_rng(0)
    # synthetic longitudes far outside the training range climb to the root
    lon = np.full(clustered_dataset.n, 500.0)
    lat = synthesize_column(
        clustered_dataset, "lat", ["zone", "age", "lon"], {"lon": lon}, 1.0, TreeParams(), rng
    )
    observed = clustered_dataset.column("lat")
    assert lat.min() >= observed.min()
    assert lat.max() <= observed.max()


def test_plan_validation(clustered_dataset):
    schema = clustered_dataset.schema
    with pytest.raises(ConfigError):
        SynthesisPlan(order=("lon", "lat"), m=1)
    with pytest.raises(ConfigError):
        SynthesisPlan(order=("lon", "lon"))
    with pytest.raises(ConfigError):
        SynthesisPlan(order=("lon",), bandwidths={"lon": -1.0})
    with pytest.raises(ConfigError):
        SynthesisPlan(order=())
    with pytest.raises(ConfigError):
        SynthesisPlan(order=("age", "lon", "lat")).validate(schema)
    with pytest.raises(ConfigError):
        SynthesisPlan(order=("lon", "income")).validate(schema)
    with pytest.raises(ConfigError):
        SynthesisPlan(order=("lon", "lat"), bandwidths={"age": 2.0}).validate(schema)
    SynthesisPlan(order=("lat", "lon", "age")).validate(schema)


def test_outcome_cannot_be_synthesized():
    ds = make_dataset(
        {"lon": [1.0, 2.0], "lat": [1.0, 2.0], "y": ["0", "1"]}, levels={"y": ["0", "1"]}, outcome="y"
    )
    assert ds.schema["y"].role is VariableRole.OUTCOME
    with pytest.raises(ConfigError):
        SynthesisPlan(order=("lon", "lat", "y")).validate(ds.schema)


def test_predictors_exclude_later_plan_variables(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, attributes=["age"])
    assert plan.predictors_for(clustered_dataset.schema, "lon") == ["zone"]
    assert plan.predictors_for(clustered_dataset.schema, "lat") == ["zone", "lon"]
    assert plan.predictors_for(clustered_dataset.schema, "age") == ["zone", "lon", "lat"]
    flipped = default_plan(clustered_dataset.schema, latitude_first=True)
    assert flipped.order == ("lat", "lon")


def test_plan_dict_round_trip():
    plan = SynthesisPlan(
        order=("lon", "lat", "age"),
        bandwidths={"lon": 1.0, "lat": 1.0, "age": 2.0},
        m=4,
        seed=17,
        tree_params_by_variable={"age": TreeParams(min_node_size=10)},
    )
    assert SynthesisPlan.from_dict(json.loads(json.dumps(plan.to_dict()))) == plan


def test_write_and_load_release(tmp_path, clustered_dataset):
    plan = default_plan(clustered_dataset.schema, m=2, seed=3)
    release = generate_release(clustered_dataset, plan, MetadataLevel.RULES_ONLY)
    written = write_release(release, tmp_path / "release")
    assert [path.name for path in written] == ["synth_1.csv", "synth_2.csv", "metadata.json"]

    loaded = load_release(tmp_path / "release")
    assert loaded.m == 2
    assert loaded.metadata_level is MetadataLevel.RULES_ONLY
    for original, again in zip(release.datasets, loaded.datasets):
        np.testing.assert_allclose(again.column("lon"), original.column("lon"))

    tree = loaded.metadata["trees"]["lon"]
    assert all("values" not in node for node in tree["nodes"])

    rebuilt = rebuild_release(clustered_dataset, loaded.datasets, plan, loaded.metadata_level)
    for fresh, again in zip(release.node_ids, rebuilt.node_ids):
        np.testing.assert_array_equal(fresh["lon"], again["lon"])


def test_empty_metadata_keeps_only_the_outline(clustered_dataset):
    plan = default_plan(clustered_dataset.schema, m=2, seed=3)
    release = generate_release(clustered_dataset, plan, MetadataLevel.EMPTY)
    metadata = release.metadata()
    assert set(metadata) == {"metadata_level", "m", "order", "seed"}


def test_missing_release_directory(tmp_path):
    with pytest.raises(ConfigError):
        load_release(tmp_path)
