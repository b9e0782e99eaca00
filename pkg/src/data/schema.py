"""
Schema and Dataset Model
Variable roster, validation, and the immutable record table the rest of the toolkit reads.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import DataFileError, SchemaError

MISSING_LEVEL = "missing"


class VariableKind(str, Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


class VariableRole(str, Enum):
    LONGITUDE = "longitude"
    LATITUDE = "latitude"
    ATTRIBUTE = "attribute"
    OUTCOME = "outcome"


@dataclass(frozen=True)
class VariableSpec:
    """
    One column of the schema.

    Attributes:
        name: Column identifier (matches the CSV header)
        kind: Continuous or categorical
        levels: Ordered category labels (categorical only)
        role: Longitude, latitude, attribute or outcome
        nullable: Continuous cells may be empty (report files only)
    """

    name: str
    kind: VariableKind
    levels: Tuple[str, ...] = ()
    role: VariableRole = VariableRole.ATTRIBUTE
    nullable: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", VariableKind(self.kind))
        object.__setattr__(self, "role", VariableRole(self.role))
        object.__setattr__(self, "levels", tuple(str(level) for level in self.levels))

        if not self.name:
            raise SchemaError("variable name must be nonempty")
        if self.is_categorical:
            if not self.levels:
                raise SchemaError("categorical variable needs at least one level", column=self.name)
            if len(set(self.levels)) != len(self.levels) or any(level == "" for level in self.levels):
                raise SchemaError("categorical levels must be distinct and nonempty", column=self.name)
        elif self.levels:
            raise SchemaError("continuous variable cannot declare levels", column=self.name)

    @property
    def is_categorical(self) -> bool:
        return self.kind is VariableKind.CATEGORICAL

    @property
    def is_continuous(self) -> bool:
        return self.kind is VariableKind.CONTINUOUS

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {"name": self.name, "kind": self.kind.value, "role": self.role.value}
        if self.levels:
            out["levels"] = list(self.levels)
        if self.nullable:
            out["nullable"] = True
        return out

    @classmethod
    def from_dict(cls, raw: Mapping[str, object]) -> "VariableSpec":
        return cls(
            name=str(raw["name"]),
            kind=VariableKind(raw["kind"]),
            levels=tuple(raw.get("levels", ())),
            role=VariableRole(raw.get("role", VariableRole.ATTRIBUTE.value)),
            nullable=bool(raw.get("nullable", False)),
        )


@dataclass(frozen=True)
class Schema:
    """
    Ordered list of variables.

    Microdata schemas carry exactly one continuous longitude and one continuous
    latitude; report schemas (risk tables, estimates) set require_coordinates=False.
    """

    variables: Tuple[VariableSpec, ...]
    require_coordinates: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [var.name for var in self.variables]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise SchemaError(f"duplicate variable names: {duplicates}")
        if self.require_coordinates:
            for role in (VariableRole.LONGITUDE, VariableRole.LATITUDE):
                holders = [var for var in self.variables if var.role is role]
                if len(holders) != 1:
                    raise SchemaError(f"schema needs exactly one {role.value} variable, found {len(holders)}")
                if not holders[0].is_continuous:
                    raise SchemaError(f"{role.value} variable must be continuous", column=holders[0].name)

    @property
    def names(self) -> List[str]:
        return [var.name for var in self.variables]

    def __contains__(self, name: str) -> bool:
        return any(var.name == name for var in self.variables)

    def __getitem__(self, name: str) -> VariableSpec:
        for var in self.variables:
            if var.name == name:
                return var
        raise KeyError(name)

    @property
    def longitude(self) -> str:
        return self._by_role(VariableRole.LONGITUDE)

    @property
    def latitude(self) -> str:
        return self._by_role(VariableRole.LATITUDE)

    @property
    def geography(self) -> Tuple[str, str]:
        return self.longitude, self.latitude

    def _by_role(self, role: VariableRole) -> str:
        for var in self.variables:
            if var.role is role:
                return var.name
        raise SchemaError(f"schema has no {role.value} variable")

    def to_dict(self) -> Dict[str, object]:
        return {
            "require_coordinates": self.require_coordinates,
            "variables": [var.to_dict() for var in self.variables],
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, object]) -> "Schema":
        return cls(
            variables=tuple(VariableSpec.from_dict(item) for item in raw["variables"]),
            require_coordinates=bool(raw.get("require_coordinates", True)),
        )


def load_schema(path: Union[str, Path]) -> Schema:
    """Read a schema JSON file (the format written next to every CSV output)."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, ValueError) as exc:
        raise DataFileError(f"cannot read schema {path}: {exc}") from None
    if isinstance(raw, list):
        raw = {"variables": raw}
    return Schema.from_dict(raw)


def save_schema(schema: Schema, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(schema.to_dict(), f, indent=2)
        f.write("\n")


@dataclass(frozen=True)
class Dataset:
    """
    Immutable table of records conforming to a schema.

    The frame's index is the stable record_id (0..n-1 at ingestion). Categorical
    columns hold level labels as strings, continuous columns hold float64.
    Callers must treat `frame` as read-only; use `with_columns` to derive a new table.
    """

    schema: Schema
    frame: pd.DataFrame = field(repr=False)

    @classmethod
    def from_frame(cls, schema: Schema, frame: pd.DataFrame, validate: bool = True) -> "Dataset":
        """
        Build a dataset from a DataFrame holding the schema's columns.

        Args:
            schema: Column specification
            frame: Data; extra columns are rejected, the index becomes record_id
            validate: Check levels and finiteness

        Returns:
            New Dataset (the frame is copied)
        """
        missing = [name for name in schema.names if name not in frame.columns]
        extra = [name for name in frame.columns if name not in schema]
        if missing or extra:
            raise SchemaError(f"frame columns do not match schema (missing={missing}, extra={extra})")

        data = frame.loc[:, schema.names].copy()
        if data.index.name != "record_id":
            data.index = pd.RangeIndex(len(data), name="record_id")
        for var in schema.variables:
            if var.is_continuous:
                data[var.name] = data[var.name].astype(np.float64)
            else:
                data[var.name] = data[var.name].astype(str).astype(object)
        if validate:
            _validate_frame(schema, data)
        return cls(schema=schema, frame=data)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def n(self) -> int:
        return len(self.frame)

    @property
    def record_ids(self) -> np.ndarray:
        return self.frame.index.to_numpy()

    def column(self, name: str) -> np.ndarray:
        """Copy of one column as a numpy array."""
        if name not in self.schema:
            raise SchemaError("unknown column", column=name)
        return self.frame[name].to_numpy(copy=True)

    def coords(self) -> np.ndarray:
        """(n, 2) array of (longitude, latitude)."""
        lon, lat = self.schema.geography
        return self.frame[[lon, lat]].to_numpy(dtype=np.float64, copy=True)

    def record(self, position: int) -> Dict[str, object]:
        """Values of the row at a positional index."""
        return self.frame.iloc[position].to_dict()

    def with_columns(self, columns: Mapping[str, Sequence]) -> "Dataset":
        """
        New dataset with some columns replaced.

        Args:
            columns: Column name -> replacement values (length n)

        Returns:
            Dataset sharing the schema and record ids
        """
        data = self.frame.copy()
        for name, values in columns.items():
            if name not in self.schema:
                raise SchemaError("cannot replace unknown column", column=name)
            values = np.asarray(values)
            if len(values) != len(data):
                raise SchemaError(f"replacement has {len(values)} values for {len(data)} rows", column=name)
            data[name] = values
        return Dataset.from_frame(self.schema, data)

    def subset(self, mask: Union[np.ndarray, Sequence[bool]]) -> "Dataset":
        """Rows selected by a boolean mask, keeping their record ids."""
        data = self.frame.loc[np.asarray(mask, dtype=bool)].copy()
        return Dataset(schema=self.schema, frame=data)

    def equals(self, other: "Dataset") -> bool:
        return self.schema == other.schema and self.frame.equals(other.frame)


def _validate_frame(schema: Schema, data: pd.DataFrame) -> None:
    for var in schema.variables:
        values = data[var.name]
        if var.is_categorical:
            bad = ~values.isin(var.levels)
            if bad.any():
                position = int(np.flatnonzero(bad.to_numpy())[0])
                raise SchemaError(f"unknown category '{values.iloc[position]}'", row=position, column=var.name)
        else:
            array = values.to_numpy(dtype=np.float64)
            bad = ~np.isfinite(array)
            if var.nullable:
                bad &= ~np.isnan(array)
            if bad.any():
                position = int(np.flatnonzero(bad)[0])
                raise SchemaError("continuous value must be finite", row=position, column=var.name)


def infer_report_schema(frame: pd.DataFrame, categorical: Iterable[str] = ()) -> Schema:
    """
    Derive a coordinate-free schema for a report frame.

    Numeric columns become continuous (nullable when they contain NaN); all
    other columns, and any listed in `categorical`, become categorical with
    their observed labels as levels.
    """
    forced = set(categorical)
    variables = []
    for name in frame.columns:
        series = frame[name]
        if name not in forced and pd.api.types.is_numeric_dtype(series) and not pd.api.types.is_bool_dtype(series):
            variables.append(VariableSpec(name, VariableKind.CONTINUOUS, nullable=bool(series.isna().any())))
        else:
            levels = sorted({str(value) for value in series})
            variables.append(VariableSpec(name, VariableKind.CATEGORICAL, levels=tuple(levels or ["none"])))
    return Schema(tuple(variables), require_coordinates=False)

