"""Repeated-sampling utility experiments."""

from .experiment import ExperimentResult, UtilityExperiment, simulated_original

__all__ = ["ExperimentResult", "UtilityExperiment", "simulated_original"]
