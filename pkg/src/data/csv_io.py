"""
CSV Ingestion and Emission
UTF-8, comma-delimited, header row required; every written CSV gets a schema sidecar.
"""

from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd

from src.data.schema import MISSING_LEVEL, Dataset, Schema, infer_report_schema, load_schema, save_schema
from src.errors import CsvParseError, DataFileError, SchemaError
from src.utils.logger import get_logger

logger = get_logger(__name__)

MISSING_TOKENS = ("", "NA", "N/A", "NaN", "nan", "null")

PathLike = Union[str, Path]


def schema_sidecar_path(csv_path: PathLike) -> Path:
    """`synth_1.csv` -> `synth_1.schema.json`."""
    path = Path(csv_path)
    return path.with_name(path.stem + ".schema.json")


def load_csv(path: PathLike, schema: Optional[Schema] = None) -> Dataset:
    """
    Read a CSV file into a validated Dataset.

    Args:
        path: CSV file with a header row
        schema: Column specification; read from the sidecar when omitted

    Returns:
        Dataset with record ids 0..n-1 in file order

    Raises:
        SchemaError: header mismatch or unknown category label
        CsvParseError: non-numeric continuous cell
        DataFileError: the CSV or its schema sidecar is missing or unreadable
    """
    path = Path(path)
    if schema is None:
        schema = load_schema(schema_sidecar_path(path))

    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, ValueError) as exc:
        raise DataFileError(f"cannot read {path}: {exc}") from None
    header = list(raw.columns)
    if sorted(header) != sorted(schema.names):
        raise SchemaError(f"header {header} does not match schema names {schema.names}")

    columns = {}
    for var in schema.variables:
        cells = raw[var.name].str.strip()
        is_missing = cells.isin(MISSING_TOKENS).to_numpy()
        if var.is_categorical:
            if is_missing.any():
                if MISSING_LEVEL not in var.levels:
                    row = int(np.flatnonzero(is_missing)[0])
                    raise SchemaError(
                        f"missing value but no '{MISSING_LEVEL}' level declared", row=row, column=var.name
                    )
                cells = cells.where(~is_missing, MISSING_LEVEL)
            unknown = ~cells.isin(var.levels).to_numpy()
            if unknown.any():
                row = int(np.flatnonzero(unknown)[0])
                raise SchemaError(f"unknown category '{cells.iloc[row]}'", row=row, column=var.name)
            columns[var.name] = cells.to_numpy(dtype=object)
        else:
            numbers = pd.to_numeric(cells.where(~is_missing, None), errors="coerce").to_numpy(dtype=np.float64)
            bad = ~np.isfinite(numbers)
            if var.nullable:
                bad &= ~is_missing
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise CsvParseError(f"cannot parse '{raw[var.name].iloc[row]}' as a number", row=row, column=var.name)
            columns[var.name] = numbers

    frame = pd.DataFrame(columns, columns=schema.names)
    logger.debug(f"Loaded {len(frame)} rows from {path}")
    return Dataset.from_frame(schema, frame)


def write_csv(ds: Dataset, path: PathLike, sidecar: bool = True) -> Path:
    """
    Write a dataset as CSV (schema column order, no index).

    Args:
        ds: Dataset to write
        path: Destination CSV
        sidecar: Also write `<stem>.schema.json`

    Returns:
        Path written
    """
    path = Path(path)
    ds.frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    if sidecar:
        save_schema(ds.schema, schema_sidecar_path(path))
    return path


def write_frame_csv(frame: pd.DataFrame, path: PathLike, categorical: Iterable[str] = ()) -> Path:
    """
    Write a report table with an inferred coordinate-free schema sidecar.

    NaN cells are written empty and declared nullable so `load_csv` reads them back.
    """
    path = Path(path)
    frame = frame.reset_index(drop=True)
    schema = infer_report_schema(frame, categorical)
    out = frame.copy()
    for var in schema.variables:
        if var.is_categorical:
            out[var.name] = out[var.name].astype(str)
    out.to_csv(path, index=False, lineterminator="\n", encoding="utf-8", na_rep="")
    save_schema(schema, schema_sidecar_path(path))
    return path
