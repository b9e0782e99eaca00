"""Run configuration: JSON presets, loader and validation."""

from .config_loader import (
    CONFIG_DIR,
    ExperimentSettings,
    PlanSettings,
    PopulationSettings,
    RegionSettings,
    RunConfig,
    get_config_info,
    load_run_config,
    preset_path,
    validate_against_schema,
)

__all__ = [
    "CONFIG_DIR",
    "ExperimentSettings",
    "PlanSettings",
    "PopulationSettings",
    "RegionSettings",
    "RunConfig",
    "get_config_info",
    "load_run_config",
    "preset_path",
    "validate_against_schema",
]
