"""Tests for per-dataset estimators."""

import numpy as np
import pytest

from src.data.regions import GridRegionMap
from src.errors import ConvergenceError, EmptyCellError, SchemaError
from src.inference.estimators import (
    INTERCEPT,
    RegionFilter,
    estimate_mean,
    estimate_proportion,
    fit_logistic,
    fit_logistic_model,
)
from tests.conftest import make_dataset


def _points(n):
    return {"lon": np.linspace(1.0, 100.0, n), "lat": np.linspace(1.0, 100.0, n)}


def test_mean_of_two_values():
    ds = make_dataset({**_points(2), "age": [2.0, 4.0]})
    estimate = estimate_mean(ds, "age")
    assert estimate.q == pytest.approx(3.0)
    assert estimate.u == pytest.approx(1.0)


def test_constant_column_has_zero_variance():
    ds = make_dataset({**_points(5), "age": [7.0] * 5})
    assert estimate_mean(ds, "age").u == 0.0


def test_region_covering_everything_equals_no_filter(grid_dataset):
    region = RegionFilter(GridRegionMap(1, 1), GridRegionMap(1, 1).labels()[0])
    assert estimate_mean(grid_dataset, "age", region) == estimate_mean(grid_dataset, "age")


def test_region_with_too_few_records_is_an_empty_cell(grid_dataset):
    grid = GridRegionMap(10, 10)
    empty = next(label for label in grid.labels() if not (grid.assign_dataset(grid_dataset) == label).any())
    with pytest.raises(EmptyCellError):
        estimate_mean(grid_dataset, "age", RegionFilter(grid, empty))
    with pytest.raises(EmptyCellError):
        estimate_proportion(grid_dataset, "group", "west", RegionFilter(grid, empty))


def test_proportion_examples():
    ds = make_dataset({**_points(4), "kind": ["a", "a", "b", "b"]}, levels={"kind": ["a", "b", "c"]})
    half = estimate_proportion(ds, "kind", "a")
    assert half.q == pytest.approx(0.5)
    assert half.u == pytest.approx(0.0625)
    absent = estimate_proportion(ds, "kind", "c")
    assert absent.q == 0.0 and absent.u == 0.0


def test_estimators_check_variable_kind(grid_dataset):
    with pytest.raises(SchemaError):
        estimate_mean(grid_dataset, "group")
    with pytest.raises(SchemaError):
        estimate_proportion(grid_dataset, "age", "30")


def test_logistic_recovers_slope():
    rng = np.random.default_rng(11)
    n = 20000
    x = rng.normal(size=n)
    y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-(0.5 + x)))).astype(float)
    ds = make_dataset({**_points(n), "x": x, "y": y.astype(int).astype(str)}, levels={"y": ["0", "1"]})
    estimates = fit_logistic(ds, "y", ["x"])
    assert [e.label for e in estimates] == [INTERCEPT, "x"]
    assert estimates[1].q == pytest.approx(1.0, abs=0.05)
    assert estimates[0].q == pytest.approx(0.5, abs=0.06)


def test_independent_binary_predictor_is_near_zero():
    rng = np.random.default_rng(5)
    n = 10000
    group = rng.choice(["u", "v"], size=n)
    y = rng.choice(["0", "1"], size=n)
    ds = make_dataset({**_points(n), "group": group, "y": y}, levels={"group": ["u", "v"], "y": ["0", "1"]})
    fit = fit_logistic_model(ds, "y", ["group"])
    assert fit.names == [INTERCEPT, "group=v"]
    coefficient = fit.estimates()[1]
    assert abs(coefficient.q) < 3.0 * np.sqrt(coefficient.u)


def test_separated_data_fails_to_converge():
    ds = make_dataset(
        {**_points(6), "x": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0], "y": ["0", "0", "0", "1", "1", "1"]},
        levels={"y": ["0", "1"]},
    )
    with pytest.raises(ConvergenceError) as info:
        fit_logistic(ds, "y", ["x"])
    assert info.value.predictor == "x"


def test_continuous_outcome_must_be_zero_one():
    ds = make_dataset({**_points(4), "x": [1.0, 2.0, 3.0, 4.0], "y": [0.0, 1.0, 2.0, 1.0]})
    with pytest.raises(SchemaError):
        fit_logistic(ds, "y", ["x"])
