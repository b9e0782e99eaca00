"""Shared fixtures for the test suite."""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.data.schema import Dataset, Schema, VariableKind, VariableRole, VariableSpec

DATA_DIR = Path(__file__).parent.parent / "data"


def make_dataset(columns, levels=None, outcome=None):
    """
    Dataset from plain columns: 'lon'/'lat' become the coordinates, columns
    listed in `levels` are categorical, everything else continuous.
    """
    levels = levels or {}
    variables = []
    for name in columns:
        if name == "lon":
            variables.append(VariableSpec(name, VariableKind.CONTINUOUS, role=VariableRole.LONGITUDE))
        elif name == "lat":
            variables.append(VariableSpec(name, VariableKind.CONTINUOUS, role=VariableRole.LATITUDE))
        elif name in levels:
            role = VariableRole.OUTCOME if name == outcome else VariableRole.ATTRIBUTE
            variables.append(VariableSpec(name, VariableKind.CATEGORICAL, levels=tuple(levels[name]), role=role))
        else:
            variables.append(VariableSpec(name, VariableKind.CONTINUOUS))
    return Dataset.from_frame(Schema(tuple(variables)), pd.DataFrame(columns))


@pytest.fixture
def fixture_csv():
    return DATA_DIR / "fixture_200.csv"


@pytest.fixture
def grid_dataset():
    """Twelve records on a coarse grid with an attribute tied to location."""
    lon = np.array([10, 20, 30, 40, 60, 70, 80, 90, 15, 35, 65, 85], dtype=float)
    lat = np.array([10, 15, 20, 25, 70, 75, 80, 85, 50, 55, 45, 40], dtype=float)
    group = np.where(lon < 50, "west", "east")
    age = np.array([30, 32, 35, 38, 60, 62, 65, 68, 40, 45, 55, 58], dtype=float)
    return make_dataset({"lon": lon, "lat": lat, "group": group, "age": age}, levels={"group": ["west", "east"]})


@pytest.fixture
def clustered_dataset():
    """300 records in three well separated clusters; zone and age track the cluster."""
    rng = np.random.default_rng(7)
    centers = np.array([[20.0, 20.0], [50.0, 80.0], [80.0, 30.0]])
    membership = np.repeat(np.arange(3), 100)
    coords = np.clip(centers[membership] + rng.normal(0.0, 4.0, size=(300, 2)), 1.0, 100.0)
    zone = np.array(["a", "b", "c"], dtype=object)[membership]
    age = np.round(40.0 + 10.0 * membership + rng.normal(0.0, 3.0, size=300))
    return make_dataset(
        {"lon": coords[:, 0], "lat": coords[:, 1], "zone": zone, "age": age},
        levels={"zone": ["a", "b", "c"]},
    )
