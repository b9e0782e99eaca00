"""
Exception hierarchy for the toolkit.
Library code raises these; only the CLI turns them into exit codes.
"""

from typing import Optional


class GeoSynthError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(GeoSynthError):
    """
    Data does not conform to its schema.

    Attributes:
        row: Zero-based data row index (None when not row-specific)
        column: Offending column name (None when not column-specific)
    """

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(prefix + message)


class CsvParseError(SchemaError):
    """A continuous cell could not be parsed as a finite number."""


class DataFileError(GeoSynthError):
    """A data, schema or release file is missing or unreadable."""


class DegenerateRangeError(GeoSynthError):
    """A coordinate column is constant, so it cannot be recoded."""


class ConfigError(GeoSynthError):
    """
    Invalid run configuration or synthesis plan.

    Attributes:
        line: 1-based line in the config file, when it can be located
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(message)


class ArityError(GeoSynthError):
    """Combining rules were given fewer than two estimates."""


class EmptyCellError(GeoSynthError):
    """An estimand's filter selected too few records."""


class ConvergenceError(GeoSynthError):
    """
    Logistic regression did not converge (separation or singular information).

    Attributes:
        predictor: Design column most implicated in the failure
    """

    def __init__(self, message: str, predictor: Optional[str] = None):
        self.predictor = predictor
        super().__init__(message)


class FactorizationError(GeoSynthError):
    """Covariance matrix could not be factorized."""
