"""Schema-aware tabular data: datasets, CSV I/O, coordinate recoding, regions."""

from .schema import (
    MISSING_LEVEL,
    Dataset,
    Schema,
    VariableKind,
    VariableRole,
    VariableSpec,
    load_schema,
    save_schema,
)
from .csv_io import load_csv, write_csv, write_frame_csv, schema_sidecar_path
from .coords import CoordTransform, recode_coords
from .regions import (
    UNASSIGNED,
    GridRegionMap,
    PolygonRegionMap,
    RegionMap,
    aggregate_to_centroids,
    assign_region,
    load_polygons_csv,
    polygon_centroid,
)

__all__ = [
    "MISSING_LEVEL", "Dataset", "Schema", "VariableKind", "VariableRole", "VariableSpec",
    "load_schema", "save_schema", "load_csv", "write_csv", "write_frame_csv", "schema_sidecar_path",
    "CoordTransform", "recode_coords", "UNASSIGNED", "GridRegionMap", "PolygonRegionMap",
    "RegionMap", "aggregate_to_centroids", "assign_region", "load_polygons_csv", "polygon_centroid",
]
