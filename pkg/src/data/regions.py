"""
Region Assignment
Grid and polygon region maps used for regional estimands, plus polygon centroids.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Tuple, Union

import numpy as np
import pandas as pd

from src.data.schema import Dataset
from src.errors import ConfigError

UNASSIGNED = "unassigned"

Extent = Tuple[float, float, float, float]  # (xmin, xmax, ymin, ymax)


class RegionMap(ABC):
    """Base class: maps points (lon, lat) to region labels."""

    @abstractmethod
    def labels(self) -> List[str]:
        ...

    @abstractmethod
    def assign_many(self, x, y) -> np.ndarray:
        ...

    def assign(self, x: float, y: float) -> str:
        return str(self.assign_many(np.array([x]), np.array([y]))[0])

    def assign_dataset(self, ds: Dataset) -> np.ndarray:
        coords = ds.coords()
        return self.assign_many(coords[:, 0], coords[:, 1])


@dataclass(frozen=True)
class GridRegionMap(RegionMap):
    """
    nx-by-ny rectangular cells over an extent.

    Cells are closed on their lower-left boundary only at the extent's minimum
    edge; elsewhere a point on a shared edge belongs to the lower/left cell.
    Labels are "r<ix><iy>" (or "r<ix>_<iy>" for grids wider than 10 cells).
    """

    nx: int
    ny: int
    extent: Extent = (1.0, 100.0, 1.0, 100.0)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigError(f"grid needs at least one cell per axis (got {self.nx}x{self.ny})")
        xmin, xmax, ymin, ymax = self.extent
        if not (xmax > xmin and ymax > ymin):
            raise ConfigError(f"grid extent {self.extent} is degenerate")

    def _label(self, ix: int, iy: int) -> str:
        if self.nx <= 10 and self.ny <= 10:
            return f"r{ix}{iy}"
        return f"r{ix}_{iy}"

    def labels(self) -> List[str]:
        return [self._label(ix, iy) for ix in range(self.nx) for iy in range(self.ny)]

    @staticmethod
    def _cell_index(values: np.ndarray, lo: float, hi: float, count: int) -> np.ndarray:
        width = (hi - lo) / count
        index = np.ceil((values - lo) / width).astype(np.int64) - 1
        return np.clip(index, 0, count - 1)

    def assign_many(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        xmin, xmax, ymin, ymax = self.extent
        inside = (x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax)
        ix = self._cell_index(x, xmin, xmax, self.nx)
        iy = self._cell_index(y, ymin, ymax, self.ny)
        out = np.array([self._label(a, b) for a, b in zip(ix, iy)], dtype=object)
        out[~inside] = UNASSIGNED
        return out


def polygon_centroid(vertices: np.ndarray) -> Tuple[float, float]:
    """
    Area centroid of a simple polygon (shoelace formula).

    Falls back to the vertex mean when the polygon has zero area.
    """
    pts = np.asarray(vertices, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    x_next, y_next = np.roll(x, -1), np.roll(y, -1)
    cross = x * y_next - x_next * y
    area = cross.sum() / 2.0
    if abs(area) < 1e-12:
        return float(x.mean()), float(y.mean())
    cx = ((x + x_next) * cross).sum() / (6.0 * area)
    cy = ((y + y_next) * cross).sum() / (6.0 * area)
    return float(cx), float(cy)


def _points_in_polygon(x: np.ndarray, y: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    # even-odd ray casting
    inside = np.zeros(len(x), dtype=bool)
    vx, vy = vertices[:, 0], vertices[:, 1]
    k = len(vertices)
    for a in range(k):
        b = (a + 1) % k
        crosses = (vy[a] > y) != (vy[b] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = vx[a] + (y - vy[a]) * (vx[b] - vx[a]) / (vy[b] - vy[a])
        inside ^= crosses & (x < x_at)
    return inside


@dataclass(frozen=True, eq=False)
class PolygonRegionMap(RegionMap):
    """
    Named polygons; a point takes the label of the first polygon (in declaration
    order) that contains it, otherwise UNASSIGNED.
    """

    polygons: Tuple[Tuple[str, np.ndarray], ...]

    def __post_init__(self):
        if not self.polygons:
            raise ConfigError("polygon region map needs at least one polygon")
        for label, vertices in self.polygons:
            if len(vertices) < 3:
                raise ConfigError(f"polygon '{label}' has fewer than 3 vertices")

    @classmethod
    def from_mapping(cls, polygons: Mapping[str, np.ndarray]) -> "PolygonRegionMap":
        return cls(tuple((label, np.asarray(v, dtype=np.float64)) for label, v in polygons.items()))

    def labels(self) -> List[str]:
        return [label for label, _ in self.polygons]

    def centroids(self) -> Dict[str, Tuple[float, float]]:
        return {label: polygon_centroid(vertices) for label, vertices in self.polygons}

    def assign_many(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        out = np.full(len(x), UNASSIGNED, dtype=object)
        unassigned = np.ones(len(x), dtype=bool)
        for label, vertices in self.polygons:
            hit = unassigned & _points_in_polygon(x, y, vertices)
            out[hit] = label
            unassigned &= ~hit
        return out


def assign_region(rm: RegionMap, s: Tuple[float, float]) -> str:
    """
    Region label of a single point.

    Args:
        rm: Region map
        s: (longitude, latitude) in recoded units

    Returns:
        Region label, or UNASSIGNED outside the map
    """
    return rm.assign(float(s[0]), float(s[1]))


def load_polygons_csv(path: Union[str, Path]) -> PolygonRegionMap:
    """Read polygons from a CSV with columns region, vertex_index, x, y."""
    table = pd.read_csv(path, dtype={"region": str})
    required = {"region", "vertex_index", "x", "y"}
    if not required.issubset(table.columns):
        raise ConfigError(f"polygon file {path} needs columns {sorted(required)}")
    polygons = []
    for label, group in table.groupby("region", sort=False):
        group = group.sort_values("vertex_index")
        polygons.append((str(label), group[["x", "y"]].to_numpy(dtype=np.float64)))
    return PolygonRegionMap(tuple(polygons))


def aggregate_to_centroids(ds: Dataset, rm: PolygonRegionMap) -> Dataset:
    """
    Replace each record's coordinates by its region's area centroid.

    Records outside every polygon keep their coordinates.
    """
    labels = rm.assign_dataset(ds)
    centroids = rm.centroids()
    coords = ds.coords()
    for label, (cx, cy) in centroids.items():
        hit = labels == label
        coords[hit, 0] = cx
        coords[hit, 1] = cy
    lon, lat = ds.schema.geography
    return ds.with_columns({lon: coords[:, 0], lat: coords[:, 1]})
