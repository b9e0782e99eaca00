"""Binary regression/classification trees used by the synthesizer and the intruder models."""

from .tree import (
    CartNode,
    CartTree,
    SplitRule,
    TreeParams,
    find_leaf,
    find_leaf_with_fallback,
    fit_tree,
    node_deviance,
    within_support,
)
from .export import MetadataLevel, tree_to_dict

__all__ = [
    "CartNode",
    "CartTree",
    "SplitRule",
    "TreeParams",
    "find_leaf",
    "find_leaf_with_fallback",
    "fit_tree",
    "node_deviance",
    "within_support",
    "MetadataLevel",
    "tree_to_dict",
]
