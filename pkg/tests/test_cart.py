"""Tests for tree fitting, leaf search and metadata export."""

import math

import numpy as np
import pytest

from src.cart import (
    MetadataLevel,
    SplitRule,
    TreeParams,
    find_leaf,
    find_leaf_with_fallback,
    fit_tree,
    node_deviance,
    tree_to_dict,
    within_support,
)
from src.errors import ConfigError, SchemaError
from tests.conftest import make_dataset


def _coords(n):
    return {"lon": np.linspace(1, 100, n), "lat": np.linspace(100, 1, n)}


def test_deviance_examples():
    assert node_deviance([1.0, 1.0, 1.0]) == 0.0
    assert node_deviance([0.0, 2.0]) == pytest.approx(2.0)
    assert node_deviance(["a", "a", "b", "b"]) == pytest.approx(8 * math.log(2))
    assert node_deviance(["a", "a", "a"]) == 0.0
    with pytest.raises(ValueError):
        node_deviance([])


def test_response_equal_to_predictor_gives_small_leaves():
    x = np.arange(1.0, 101.0)
    ds = make_dataset({**_coords(100), "x": x, "y": x.copy()})
    tree = fit_tree(ds, "y", ["x"], TreeParams(min_node_size=5))
    sizes = [leaf.n for leaf in tree.leaves()]
    assert sum(sizes) == 100
    assert min(sizes) >= 5
    assert max(sizes) <= 9


def test_constant_response_is_root_only():
    ds = make_dataset({**_coords(30), "x": np.arange(30.0), "y": np.full(30, 4.0)})
    tree = fit_tree(ds, "y", ["x"])
    assert len(tree.nodes) == 1
    assert tree.root.is_leaf
    assert tree.depth() == 0


def test_xor_needs_a_zero_gain_first_split():
    a = np.repeat([0.0, 0.0, 1.0, 1.0], 10)
    b = np.repeat([0.0, 1.0, 0.0, 1.0], 10)
    y = np.logical_xor(a, b).astype(float)
    ds = make_dataset({**_coords(40), "a": a, "b": b, "y": y})
    tree = fit_tree(ds, "y", ["a", "b"])
    assert tree.depth() == 2
    assert len(tree.leaves()) == 4
    assert all(leaf.deviance == pytest.approx(0.0) for leaf in tree.leaves())
    # tie goes to the earlier predictor
    assert tree.root.rule.variable == "a"
    assert tree.root.rule.threshold == pytest.approx(0.5)


def test_classification_split_on_category():
    group = np.array(["x", "y", "z"] * 20, dtype=object)
    label = np.where(group == "z", "yes", "no")
    ds = make_dataset(
        {**_coords(60), "group": group, "label": label},
        levels={"group": ["x", "y", "z"], "label": ["no", "yes"]},
    )
    tree = fit_tree(ds, "label", ["group"])
    assert not tree.is_regression
    assert tree.root.rule.categories in (frozenset({"x", "y"}), frozenset({"z"}))
    for leaf in tree.leaves():
        assert len(set(leaf.values)) == 1


def test_leaves_partition_training_rows(clustered_dataset):
    tree = fit_tree(clustered_dataset, "lon", ["zone", "age"], TreeParams(min_node_size=5))
    members = np.concatenate([leaf.member_rows for leaf in tree.leaves()])
    assert sorted(members) == list(clustered_dataset.record_ids)
    for node in tree.nodes:
        if not node.is_leaf:
            left, right = node.children
            assert tree.nodes[left].n + tree.nodes[right].n == node.n
            assert tree.nodes[left].n >= 5 and tree.nodes[right].n >= 5


def test_find_leaf_matches_training_membership(grid_dataset):
    tree = fit_tree(grid_dataset, "lon", ["group", "age"], TreeParams(min_node_size=2))
    for position in range(grid_dataset.n):
        record = grid_dataset.record(position)
        leaf = find_leaf(tree, record)
        assert grid_dataset.record_ids[position] in leaf.member_rows


def test_vectorized_routing_agrees_with_find_leaf(clustered_dataset):
    tree = fit_tree(clustered_dataset, "lat", ["zone", "age"])
    columns = {name: clustered_dataset.column(name) for name in ("zone", "age")}
    routed = tree.route(columns)
    for position in range(0, clustered_dataset.n, 17):
        assert routed[position] == find_leaf(tree, clustered_dataset.record(position)).id


def test_unseen_category_goes_right():
    rule = SplitRule("color", categories=frozenset({"red"}))
    assert rule.goes_left("red")
    assert not rule.goes_left("violet")
    numeric = SplitRule("age", threshold=30.5)
    assert numeric.goes_left(30)
    assert not numeric.goes_left(30.5)


def test_fallback_climbs_to_covering_ancestor():
    x = np.arange(1.0, 41.0)
    y = np.where(x <= 20, 0.0, 10.0)
    ds = make_dataset({**_coords(40), "x": x, "y": y})
    tree = fit_tree(ds, "y", ["x"], TreeParams(min_node_size=5))
    check = within_support(["x"])

    inside = find_leaf_with_fallback(tree, {"x": 10.0}, check)
    assert inside.is_leaf

    # 20.7 routes right but lies below the right leaf's observed [21, 40]
    outside = find_leaf_with_fallback(tree, {"x": 20.7}, check)
    assert not outside.is_leaf
    assert outside.covers("x", 20.7)

    beyond = find_leaf_with_fallback(tree, {"x": 500.0}, check)
    assert beyond.id == tree.root.id


def test_vectorized_fallback_agrees(clustered_dataset):
    tree = fit_tree(clustered_dataset, "lon", ["age"], TreeParams(min_node_size=10))
    ages = np.array([10.0, 40.0, 55.0, 63.5, 200.0])
    routed = tree.route_with_fallback({"age": ages}, ["age"])
    check = within_support(["age"])
    for age, node_id in zip(ages, routed):
        assert find_leaf_with_fallback(tree, {"age": age}, check).id == node_id


def test_invalid_fits():
    ds = make_dataset({**_coords(10), "x": np.arange(10.0)})
    with pytest.raises(SchemaError):
        fit_tree(ds, "nope", ["x"])
    with pytest.raises(ConfigError):
        fit_tree(ds, "x", ["x"])
    with pytest.raises(ConfigError):
        TreeParams(min_node_size=0)


def test_export_levels(grid_dataset):
    tree = fit_tree(grid_dataset, "lon", ["group", "age"], TreeParams(min_node_size=2))
    assert tree_to_dict(tree, MetadataLevel.EMPTY) == {}

    rules = tree_to_dict(tree, MetadataLevel.RULES_ONLY)
    assert len(rules["nodes"]) == len(tree.nodes)
    assert all("values" not in node for node in rules["nodes"])
    assert any("rule" in node for node in rules["nodes"])

    full = tree_to_dict(tree, MetadataLevel.FULL)
    assert sum(len(node["values"]) for node in full["nodes"] if node.get("leaf")) == grid_dataset.n


def test_metadata_level_parse():
    assert MetadataLevel.parse("rules_only") is MetadataLevel.RULES_ONLY
    assert MetadataLevel.parse(" full ") is MetadataLevel.FULL
    with pytest.raises(ValueError):
        MetadataLevel.parse("partial")
