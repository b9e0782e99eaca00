"""Analytical validity: surrogate outcomes, simulated populations, and release-versus-original comparisons."""

from .gp import GpSpec, simulate_gp
from .outcome import (
    OUTCOME_LEVELS,
    SurrogateOutcomeSpec,
    attach_outcome,
    generate_surrogate_outcome,
    linear_predictor,
    outcome_probability,
)
from .population import DEFAULT_CLUSTERS, ClusterSpec, population_schema, simulate_population
from .comparisons import (
    ALL_REGIONS,
    Estimand,
    count_large_mse,
    descriptive_comparison,
    misclassification,
    regression_report,
    release_datasets,
    scatter_frame,
    split_train_test,
)
from .noise import NoiseResult, add_geographic_noise
from .variogram import variogram_check

__all__ = [
    "GpSpec",
    "simulate_gp",
    "OUTCOME_LEVELS",
    "SurrogateOutcomeSpec",
    "attach_outcome",
    "generate_surrogate_outcome",
    "linear_predictor",
    "outcome_probability",
    "DEFAULT_CLUSTERS",
    "ClusterSpec",
    "population_schema",
    "simulate_population",
    "ALL_REGIONS",
    "Estimand",
    "count_large_mse",
    "descriptive_comparison",
    "misclassification",
    "regression_report",
    "release_datasets",
    "scatter_frame",
    "split_train_test",
    "NoiseResult",
    "add_geographic_noise",
    "variogram_check",
]
