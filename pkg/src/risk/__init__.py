"""Disclosure risk: geography recovery and re-identification attacks on a release."""

from .scenario import GeoPrior, IntruderScenario, Knowledge, PriorKind
from .geography import (
    GeoPosterior,
    GeoRiskRecord,
    GeographyAttack,
    assess_geo_risk,
    geo_posterior,
    geo_risk,
    summarize_geo_risk,
)
from .identification import (
    DEFAULT_MC_DRAWS,
    IdentificationAttack,
    MatchRiskSummary,
    assess_identification_risk,
    match_probabilities,
    match_risk_summary,
    summary_from_counts,
)

__all__ = [
    "GeoPrior",
    "IntruderScenario",
    "Knowledge",
    "PriorKind",
    "GeoPosterior",
    "GeoRiskRecord",
    "GeographyAttack",
    "assess_geo_risk",
    "geo_posterior",
    "geo_risk",
    "summarize_geo_risk",
    "DEFAULT_MC_DRAWS",
    "IdentificationAttack",
    "MatchRiskSummary",
    "assess_identification_risk",
    "match_probabilities",
    "match_risk_summary",
    "summary_from_counts",
]
