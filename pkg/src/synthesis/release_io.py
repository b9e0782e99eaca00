"""
Release Files
Writes and reads synth_<l>.csv replicates with the metadata.json descriptor.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Union

from src.cart.export import MetadataLevel
from src.data.csv_io import load_csv, write_csv
from src.data.schema import Dataset
from src.errors import ConfigError, DataFileError
from src.synthesis.synthesizer import SyntheticRelease
from src.utils.logger import get_logger

logger = get_logger(__name__)

METADATA_FILE = "metadata.json"


def replicate_path(directory: Union[str, Path], l: int) -> Path:
    """Path of replicate l (1-based)."""
    return Path(directory) / f"synth_{l}.csv"


def write_release(release: SyntheticRelease, directory: Union[str, Path]) -> List[Path]:
    """
    Write every replicate and the metadata file.

    Args:
        release: Release to persist
        directory: Output directory (created if needed)

    Returns:
        Paths written, replicates first
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for l, dataset in enumerate(release.datasets, start=1):
        written.append(write_csv(dataset, replicate_path(directory, l)))
    metadata_path = directory / METADATA_FILE
    with open(metadata_path, "w", encoding="utf-8") as f:
        json.dump(release.metadata(), f, indent=2)
        f.write("\n")
    written.append(metadata_path)
    logger.info(f"Wrote {release.m} replicates and metadata to {directory}")
    return written


@dataclass
class LoadedRelease:
    """Replicates and metadata read back from a release directory."""

    datasets: List[Dataset]
    metadata: Dict[str, object]

    @property
    def m(self) -> int:
        return len(self.datasets)

    @property
    def metadata_level(self) -> MetadataLevel:
        try:
            return MetadataLevel.parse(self.metadata.get("metadata_level", "EMPTY"))
        except ValueError as exc:
            raise DataFileError(f"release metadata: {exc}") from None


def load_release(directory: Union[str, Path]) -> LoadedRelease:
    """
    Read synth_1.csv .. synth_m.csv and metadata.json.

    m is taken from the metadata when present, otherwise from the replicate files found.
    """
    directory = Path(directory)
    metadata_path = directory / METADATA_FILE
    metadata: Dict[str, object] = {}
    if metadata_path.exists():
        try:
            with open(metadata_path, "r", encoding="utf-8") as f:
                metadata = json.load(f)
        except (OSError, ValueError) as exc:
            raise DataFileError(f"cannot read {metadata_path}: {exc}") from None
        if not isinstance(metadata, dict):
            raise DataFileError(f"{metadata_path} must hold a JSON object")

    if "m" in metadata:
        try:
            m = int(metadata["m"])
        except (TypeError, ValueError):
            raise DataFileError(f"{metadata_path}: m must be an integer (got {metadata['m']!r})") from None
    else:
        m = 0
        while replicate_path(directory, m + 1).exists():
            m += 1
    if m < 1:
        raise ConfigError(f"no synth_<l>.csv replicates found in {directory}")

    datasets = []
    for l in range(1, m + 1):
        path = replicate_path(directory, l)
        if not path.exists():
            raise ConfigError(f"release is missing replicate file {path.name}")
        datasets.append(load_csv(path))
    return LoadedRelease(datasets=datasets, metadata=metadata)
