"""Combining-rule inference for analysts of a partially synthetic release."""

from .combining import MiEstimate, ReplicateEstimate, combine, combine_by_label
from .estimators import (
    INTERCEPT,
    LogisticFit,
    RegionFilter,
    binary_outcome,
    estimate_mean,
    estimate_proportion,
    fit_logistic,
    fit_logistic_model,
)

__all__ = [
    "MiEstimate",
    "ReplicateEstimate",
    "combine",
    "combine_by_label",
    "INTERCEPT",
    "LogisticFit",
    "RegionFilter",
    "binary_outcome",
    "estimate_mean",
    "estimate_proportion",
    "fit_logistic",
    "fit_logistic_model",
]
