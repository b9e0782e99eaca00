"""
Coordinate Recoding
Affine map of longitude/latitude onto a working interval (default [1, 100]).
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.data.schema import Dataset
from src.errors import DegenerateRangeError

DEFAULT_TARGET_RANGE = (1.0, 100.0)


@dataclass(frozen=True)
class CoordTransform:
    """
    Per-axis affine transform between source coordinates and the target interval.

    Attributes:
        lon_range: Source (min, max) of longitude
        lat_range: Source (min, max) of latitude
        target_range: Destination interval shared by both axes
    """

    lon_range: Tuple[float, float]
    lat_range: Tuple[float, float]
    target_range: Tuple[float, float] = DEFAULT_TARGET_RANGE

    def __post_init__(self):
        for label, (lo, hi) in (("longitude", self.lon_range), ("latitude", self.lat_range)):
            if not hi > lo:
                raise DegenerateRangeError(f"{label} range [{lo}, {hi}] is degenerate")
        lo, hi = self.target_range
        if not hi > lo:
            raise DegenerateRangeError(f"target range [{lo}, {hi}] is degenerate")

    def _axis(self, axis: str) -> Tuple[float, float]:
        return self.lon_range if axis == "lon" else self.lat_range

    def forward_axis(self, values, axis: str) -> np.ndarray:
        lo, hi = self._axis(axis)
        t_lo, t_hi = self.target_range
        values = np.asarray(values, dtype=np.float64)
        out = t_lo + (values - lo) / (hi - lo) * (t_hi - t_lo)
        # source endpoints land exactly on the target endpoints
        return np.where(values == hi, t_hi, np.where(values == lo, t_lo, out))

    def inverse_axis(self, values, axis: str) -> np.ndarray:
        lo, hi = self._axis(axis)
        t_lo, t_hi = self.target_range
        values = np.asarray(values, dtype=np.float64)
        return lo + (values - t_lo) / (t_hi - t_lo) * (hi - lo)

    def forward(self, lon, lat) -> Tuple[np.ndarray, np.ndarray]:
        return self.forward_axis(lon, "lon"), self.forward_axis(lat, "lat")

    def inverse(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        return self.inverse_axis(x, "lon"), self.inverse_axis(y, "lat")

    def to_dict(self) -> dict:
        return {
            "lon_range": list(self.lon_range),
            "lat_range": list(self.lat_range),
            "target_range": list(self.target_range),
        }


def recode_coords(ds: Dataset, target: Tuple[float, float] = DEFAULT_TARGET_RANGE) -> Tuple[Dataset, CoordTransform]:
    """
    Map both coordinate columns affinely onto `target`.

    Args:
        ds: Dataset in source coordinates
        target: Destination interval

    Returns:
        (recoded dataset, transform for mapping back)

    Raises:
        DegenerateRangeError: a coordinate column is constant
    """
    lon_name, lat_name = ds.schema.geography
    lon = ds.column(lon_name)
    lat = ds.column(lat_name)
    for name, values in ((lon_name, lon), (lat_name, lat)):
        if values.min() == values.max():
            raise DegenerateRangeError(f"coordinate column '{name}' is constant ({values.min()})")

    transform = CoordTransform(
        lon_range=(float(lon.min()), float(lon.max())),
        lat_range=(float(lat.min()), float(lat.max())),
        target_range=(float(target[0]), float(target[1])),
    )
    new_lon, new_lat = transform.forward(lon, lat)
    return ds.with_columns({lon_name: new_lon, lat_name: new_lat}), transform
