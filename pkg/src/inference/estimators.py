"""
Per-Dataset Estimators
Means, proportions and logistic regression coefficients with their variances.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit

from src.data.regions import RegionMap
from src.data.schema import Dataset
from src.errors import ConvergenceError, EmptyCellError, SchemaError
from src.inference.combining import ReplicateEstimate
from src.utils.logger import get_logger

logger = get_logger(__name__)

INTERCEPT = "(intercept)"
MAX_ITERATIONS = 50
TOLERANCE = 1e-8
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class RegionFilter:
    """Keep only records whose coordinates fall in one region."""

    region_map: RegionMap
    label: str

    def mask(self, ds: Dataset) -> np.ndarray:
        return self.region_map.assign_dataset(ds) == self.label


def _filtered(ds: Dataset, region: Optional[RegionFilter]) -> Dataset:
    return ds if region is None else ds.subset(region.mask(ds))


def estimate_mean(ds: Dataset, variable: str, region: Optional[RegionFilter] = None) -> ReplicateEstimate:
    """
    Sample mean with variance s^2 / n.

    Args:
        ds: One dataset (original or synthetic)
        variable: Continuous column
        region: Optional region filter

    Returns:
        ReplicateEstimate
    """
    if not ds.schema[variable].is_continuous:
        raise SchemaError("mean needs a continuous variable", column=variable)
    values = _filtered(ds, region).column(variable)
    n = len(values)
    if n < 2:
        where = f" in region '{region.label}'" if region else ""
        raise EmptyCellError(f"mean of '{variable}' needs at least 2 records{where} (found {n})")
    return ReplicateEstimate(q=float(values.mean()), u=float(values.var(ddof=1) / n), label=f"mean({variable})")


def estimate_proportion(
    ds: Dataset,
    variable: str,
    level: str,
    region: Optional[RegionFilter] = None,
) -> ReplicateEstimate:
    """Share of records at `level`, with variance p(1-p)/n."""
    if not ds.schema[variable].is_categorical:
        raise SchemaError("proportion needs a categorical variable", column=variable)
    values = _filtered(ds, region).column(variable)
    n = len(values)
    if n == 0:
        where = f" in region '{region.label}'" if region else ""
        raise EmptyCellError(f"no records{where} to estimate the share of {variable}={level}")
    p = float(np.mean(values == str(level)))
    return ReplicateEstimate(q=p, u=p * (1.0 - p) / n, label=f"share({variable}={level})")


@dataclass
class LogisticFit:
    """
    Maximum-likelihood logistic regression.

    Attributes:
        names: Coefficient labels, intercept first
        coef: Estimates
        cov: Inverse Fisher information at the estimate
        iterations: IRLS steps taken
    """

    outcome: str
    positive_level: str
    predictors: Sequence[str]
    names: List[str]
    coef: np.ndarray
    cov: np.ndarray
    iterations: int
    dummy_levels: dict

    def estimates(self) -> List[ReplicateEstimate]:
        return [
            ReplicateEstimate(q=float(c), u=float(v), label=name)
            for name, c, v in zip(self.names, self.coef, np.diag(self.cov))
        ]

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        X, _ = _design_matrix(ds, self.predictors, self.dummy_levels)
        return expit(X @ self.coef)

    def predict(self, ds: Dataset, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(ds) >= threshold).astype(np.int64)


def binary_outcome(ds: Dataset, outcome: str, positive_level: Optional[str] = None):
    """Outcome as 0/1 floats plus the level coded 1."""
    spec = ds.schema[outcome]
    values = ds.column(outcome)
    if spec.is_categorical:
        present = sorted(set(values))
        if positive_level is None:
            if len(present) != 2:
                raise SchemaError(f"logistic outcome must have exactly 2 observed levels (found {present})", column=outcome)
            positive_level = spec.levels[max(spec.levels.index(level) for level in present)]
        return (values == str(positive_level)).astype(np.float64), str(positive_level)
    if not np.isin(values, (0.0, 1.0)).all():
        raise SchemaError("continuous logistic outcome must be coded 0/1", column=outcome)
    return values.astype(np.float64), "1"


def _reference_levels(ds: Dataset, predictors: Sequence[str]) -> dict:
    """Non-reference levels per categorical predictor: declared order, first observed level dropped."""
    levels = {}
    for name in predictors:
        spec = ds.schema[name]
        if spec.is_categorical:
            present = set(ds.column(name))
            observed = [level for level in spec.levels if level in present]
            levels[name] = observed[1:]
    return levels


def _design_matrix(ds: Dataset, predictors: Sequence[str], levels: dict):
    columns = [np.ones(ds.n)]
    names = [INTERCEPT]
    owners = [INTERCEPT]
    for name in predictors:
        values = ds.column(name)
        if name in levels:
            for level in levels[name]:
                columns.append((values == level).astype(np.float64))
                names.append(f"{name}={level}")
                owners.append(name)
        else:
            columns.append(values.astype(np.float64))
            names.append(name)
            owners.append(name)
    return np.column_stack(columns), (names, owners)


def _ill_conditioned(information: np.ndarray) -> bool:
    if not np.isfinite(information).all():
        return True
    condition = np.linalg.cond(information)
    return not np.isfinite(condition) or condition > MAX_CONDITION


def fit_logistic_model(
    ds: Dataset,
    outcome: str,
    predictors: Sequence[str],
    positive_level: Optional[str] = None,
) -> LogisticFit:
    """
    Logistic regression by iteratively reweighted least squares.

    Categorical predictors enter as indicators of their non-reference levels.
    Stops when the largest coefficient change is below 1e-8; raises
    ConvergenceError after 50 iterations or when the information matrix is
    singular, naming the predictor with the largest coefficient.

    Args:
        ds: Dataset
        outcome: Binary outcome (2-level categorical or 0/1 continuous)
        predictors: Main effects
        positive_level: Level coded 1 (defaults to the later declared level)

    Returns:
        LogisticFit
    """
    y, positive_level = binary_outcome(ds, outcome, positive_level)
    levels = _reference_levels(ds, predictors)
    X, (names, owners) = _design_matrix(ds, predictors, levels)
    beta = np.zeros(X.shape[1])

    def culprit() -> str:
        return owners[int(np.argmax(np.abs(beta[1:]))) + 1] if len(beta) > 1 else INTERCEPT

    for iteration in range(1, MAX_ITERATIONS + 1):
        mu = expit(X @ beta)
        weights = mu * (1.0 - mu)
        information = X.T @ (weights[:, None] * X)
        if _ill_conditioned(information):
            raise ConvergenceError("information matrix is singular (separation or collinearity)", predictor=culprit())
        step = np.linalg.solve(information, X.T @ (y - mu))
        beta = beta + step
        if np.max(np.abs(step)) < TOLERANCE:
            break
    else:
        raise ConvergenceError(f"IRLS did not converge in {MAX_ITERATIONS} iterations", predictor=culprit())

    mu = expit(X @ beta)
    information = X.T @ ((mu * (1.0 - mu))[:, None] * X)
    if _ill_conditioned(information):
        raise ConvergenceError("information matrix is singular at the estimate", predictor=culprit())
    cov = np.linalg.inv(information)
    logger.debug(f"Logistic fit of '{outcome}' converged in {iteration} iterations")
    return LogisticFit(
        outcome=outcome,
        positive_level=positive_level,
        predictors=tuple(predictors),
        names=names,
        coef=beta,
        cov=cov,
        iterations=iteration,
        dummy_levels=levels,
    )


def fit_logistic(
    ds: Dataset,
    outcome: str,
    predictors: Sequence[str],
    positive_level: Optional[str] = None,
) -> List[ReplicateEstimate]:
    """One ReplicateEstimate per coefficient (intercept first), u = squared standard error."""
    return fit_logistic_model(ds, outcome, predictors, positive_level).estimates()
