"""Sequential CART synthesis of point locations and attributes."""

from .sampling import (
    bayesian_bootstrap,
    bootstrap_weights,
    kernel_sample,
    kernel_sample_many,
    truncated_kernel_pdf,
)
from .plan import SynthesisPlan, default_plan
from .synthesizer import (
    SyntheticRelease,
    fit_plan_trees,
    generate_release,
    locate_nodes,
    rebuild_release,
    synthesize_column,
)
from .release_io import LoadedRelease, load_release, replicate_path, write_release

__all__ = [
    "bayesian_bootstrap",
    "bootstrap_weights",
    "kernel_sample",
    "kernel_sample_many",
    "truncated_kernel_pdf",
    "SynthesisPlan",
    "default_plan",
    "SyntheticRelease",
    "fit_plan_trees",
    "generate_release",
    "locate_nodes",
    "rebuild_release",
    "synthesize_column",
    "LoadedRelease",
    "load_release",
    "replicate_path",
    "write_release",
]
