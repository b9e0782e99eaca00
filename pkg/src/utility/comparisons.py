"""
Utility Comparisons
Original-versus-release descriptive estimands, regression coefficients and misclassification rates.
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.data.regions import RegionMap
from src.data.schema import Dataset
from src.errors import ConfigError, EmptyCellError
from src.inference.combining import ReplicateEstimate, combine, combine_by_label
from src.inference.estimators import (
    LogisticFit,
    binary_outcome,
    estimate_mean,
    estimate_proportion,
    fit_logistic_model,
)
from src.synthesis.synthesizer import SyntheticRelease
from src.utils.logger import get_logger

logger = get_logger(__name__)

ALL_REGIONS = "all"
ReleaseLike = Union[SyntheticRelease, Sequence[Dataset]]


@dataclass(frozen=True)
class Estimand:
    """
    A descriptive quantity: mean of a continuous variable or share of one level.

    Written as "mean:age" or "proportion:race=black" in configs and on the command line.
    """

    kind: str
    variable: str
    level: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("mean", "proportion"):
            raise ConfigError(f"unknown estimand kind '{self.kind}' (use mean or proportion)")
        if self.kind == "proportion" and self.level is None:
            raise ConfigError(f"proportion estimand on '{self.variable}' needs a level")

    @classmethod
    def parse(cls, text: str) -> "Estimand":
        kind, sep, rest = str(text).partition(":")
        if not sep or not rest:
            raise ConfigError(f"cannot parse estimand '{text}' (expected mean:<var> or proportion:<var>=<level>)")
        kind = kind.strip().lower()
        if kind == "share":
            kind = "proportion"
        variable, _, level = rest.partition("=")
        return cls(kind, variable.strip(), level.strip() or None)

    @property
    def is_percentage(self) -> bool:
        return self.kind == "proportion"

    @property
    def scale(self) -> float:
        return 100.0 if self.is_percentage else 1.0

    @property
    def label(self) -> str:
        if self.is_percentage:
            return f"% {self.variable}={self.level}"
        return f"avg {self.variable}"

    def estimate(self, ds: Dataset) -> ReplicateEstimate:
        if self.kind == "mean":
            return estimate_mean(ds, self.variable)
        return estimate_proportion(ds, self.variable, self.level)


def release_datasets(release: ReleaseLike) -> List[Dataset]:
    if isinstance(release, SyntheticRelease):
        return list(release.datasets)
    if isinstance(release, Dataset):
        return [release]
    return list(release)


def _point_estimate(estimates: Sequence[ReplicateEstimate]) -> float:
    if len(estimates) == 1:
        return estimates[0].q
    return combine(estimates).q_bar


def _regions(ds: Dataset, region_map: Optional[RegionMap], labels: Sequence[str]) -> Dict[str, Dataset]:
    out = {ALL_REGIONS: ds}
    if region_map is not None:
        assigned = region_map.assign_dataset(ds)
        for label in labels:
            out[label] = ds.subset(assigned == label)
    return out


def descriptive_comparison(
    original: Dataset,
    releases: Sequence[ReleaseLike],
    region_map: Optional[RegionMap],
    estimands: Sequence[Estimand],
    regions: Optional[Sequence[str]] = None,
) -> pd.DataFrame:
    """
    Compare descriptive estimands between the original and repeated releases.

    For each estimand and region, Q comes from the original and q_bar_m from
    each release (a single-dataset release contributes its own estimate).
    Reports the median of q_bar_m and its MSE around Q across releases.
    Percentages are in percentage points. A release whose replicates leave a
    region without enough records is flagged and left out of the MSE.

    Args:
        original: Original data
        releases: One entry per repetition
        region_map: Region definition (None for the whole map only)
        estimands: Quantities to compare
        regions: Region labels to report (all of the map's labels when None)

    Returns:
        DataFrame with estimand, region, q_original, median, mse, reps, flagged_reps
    """
    if not releases:
        raise ConfigError("descriptive comparison needs at least one release")
    labels = list(regions) if regions is not None else (region_map.labels() if region_map is not None else [])

    original_parts = _regions(original, region_map, labels)
    per_release = []
    for release in releases:
        per_release.append([_regions(ds, region_map, labels) for ds in release_datasets(release)])

    rows = []
    for estimand in estimands:
        for region in [ALL_REGIONS] + labels:
            try:
                q_original = estimand.estimate(original_parts[region]).q * estimand.scale
            except EmptyCellError:
                q_original = float("nan")
            q_bars = []
            flagged = 0
            for parts in per_release:
                try:
                    estimates = [estimand.estimate(part[region]) for part in parts]
                except EmptyCellError:
                    flagged += 1
                    continue
                q_bars.append(_point_estimate(estimates) * estimand.scale)
            q_bars = np.asarray(q_bars)
            if len(q_bars) and np.isfinite(q_original):
                median = float(np.median(q_bars))
                mse = float(np.mean((q_bars - q_original) ** 2))
            else:
                median = mse = float("nan")
            if flagged:
                logger.warning(f"{estimand.label} in region '{region}': {flagged} releases flagged (too few records)")
            rows.append(
                {
                    "estimand": estimand.label,
                    "region": region,
                    "q_original": q_original,
                    "median": median,
                    "mse": mse,
                    "reps": len(q_bars),
                    "flagged_reps": flagged,
                }
            )
    return pd.DataFrame(rows)


def count_large_mse(report: pd.DataFrame, threshold: float = 3.0) -> int:
    """Number of regional percentage estimands whose MSE exceeds `threshold` points."""
    regional = report[(report["region"] != ALL_REGIONS) & report["estimand"].str.startswith("%")]
    return int((regional["mse"] > threshold).sum())


def misclassification(
    model: LogisticFit,
    ds: Dataset,
    outcome: Optional[str] = None,
    threshold: float = 0.5,
    coefficients: Optional[np.ndarray] = None,
) -> float:
    """
    Share of records whose prediction (p > threshold) differs from the outcome.

    Args:
        model: Fitted model (supplies the design)
        ds: Records to score
        outcome: Outcome column (the model's by default)
        threshold: Decision threshold
        coefficients: Replacement coefficients, e.g. combined estimates

    Returns:
        Misclassification rate in [0, 1]
    """
    if coefficients is not None:
        coefficients = np.asarray(coefficients, dtype=np.float64)
        if coefficients.shape != model.coef.shape:
            raise ConfigError(f"expected {len(model.coef)} coefficients, got {coefficients.shape}")
        model = replace(model, coef=coefficients)
    y, _ = binary_outcome(ds, outcome or model.outcome, model.positive_level)
    predicted = (model.predict_proba(ds) > threshold).astype(np.float64)
    return float(np.mean(predicted != y))


def split_train_test(n: int, test_fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of held-out rows (round(n * test_fraction) of them, at least one)."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test fraction must be in (0, 1) (got {test_fraction})")
    size = min(n - 1, max(1, int(round(n * test_fraction))))
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=size, replace=False)] = True
    return mask


def _combined_model(fits: Sequence[LogisticFit]) -> Tuple[LogisticFit, List[Tuple[str, float, float]]]:
    if len(fits) == 1:
        fit = fits[0]
        rows = [(e.label, e.q, float(np.sqrt(e.u))) for e in fit.estimates()]
        return fit, rows
    combined = combine_by_label([fit.estimates() for fit in fits])
    by_label = {c.label: c for c in combined}
    base = fits[0]
    if set(by_label) != set(base.names):
        logger.warning("Coefficient sets differ across replicates; scoring with the first replicate's fit")
        coef = base.coef
    else:
        coef = np.array([by_label[name].q_bar for name in base.names])
    rows = [(c.label, c.q_bar, c.se) for c in combined]
    return replace(base, coef=coef), rows


def regression_report(
    original: Dataset,
    variants: Mapping[str, ReleaseLike],
    outcome: str,
    predictors: Sequence[str],
    test_mask: np.ndarray,
    positive_level: Optional[str] = None,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Nonspatial logistic regression on the original and on each data variant.

    Every variant is fit on its training rows; multi-dataset variants are
    combined, single datasets reported as is. Misclassification is scored on the
    original training rows (in sample) and on the held-out original rows.

    Args:
        original: Original data including the outcome
        variants: Name -> release or single dataset
        outcome: Binary outcome column
        predictors: Main effects
        test_mask: Held-out rows (aligned with original rows)
        positive_level: Outcome level coded 1

    Returns:
        (coefficients frame: variant, coefficient, estimate, se;
         misclassification frame: variant, in_sample, out_of_sample)
    """
    test_mask = np.asarray(test_mask, dtype=bool)
    train_original = original.subset(~test_mask)
    test_original = original.subset(test_mask)

    coefficient_rows = []
    rate_rows = []
    sources: Dict[str, List[Dataset]] = {"original": [original]}
    sources.update({name: release_datasets(release) for name, release in variants.items()})
    for name, datasets in sources.items():
        fits = [fit_logistic_model(ds.subset(~test_mask), outcome, predictors, positive_level) for ds in datasets]
        model, rows = _combined_model(fits)
        for label, estimate, se in rows:
            coefficient_rows.append({"variant": name, "coefficient": label, "estimate": estimate, "se": se})
        rate_rows.append(
            {
                "variant": name,
                "in_sample": misclassification(model, train_original),
                "out_of_sample": misclassification(model, test_original),
            }
        )
    return pd.DataFrame(coefficient_rows), pd.DataFrame(rate_rows)


def scatter_frame(original: Dataset, synthetic: Dataset, color: Optional[str] = "race") -> pd.DataFrame:
    """Original and synthetic coordinates side by side, one row per record."""
    lon, lat = original.schema.geography
    frame = pd.DataFrame(
        {
            "record_id": original.record_ids,
            "lon": original.column(lon),
            "lat": original.column(lat),
            "lon_synthetic": synthetic.column(lon),
            "lat_synthetic": synthetic.column(lat),
        }
    )
    if color and color in original.schema:
        frame[color] = original.column(color)
    return frame
