"""
Tree Metadata Export
Redacted JSON-ready views of fitted trees for the release metadata file.
"""

from enum import IntEnum
from typing import Dict, List

import numpy as np

from src.cart.tree import CartNode, CartTree


class MetadataLevel(IntEnum):
    """
    How much of the synthesizer is disclosed alongside the release.

    EMPTY: nothing beyond the m datasets.
    RULES_ONLY: split rules and bandwidths; leaf values redacted.
    FULL: rules, bandwidths, and each node's original value multiset.
    """

    EMPTY = 0
    RULES_ONLY = 1
    FULL = 2

    @classmethod
    def parse(cls, text: str) -> "MetadataLevel":
        try:
            return cls[str(text).strip().upper()]
        except KeyError:
            choices = ", ".join(level.name for level in cls)
            raise ValueError(f"unknown metadata level '{text}' (choose from {choices})") from None


def _support_to_dict(node: CartNode) -> Dict[str, object]:
    out: Dict[str, object] = {}
    for name, support in node.support.items():
        if isinstance(support, frozenset):
            out[name] = sorted(support)
        else:
            out[name] = [support[0], support[1]]
    return out


def _node_to_dict(node: CartNode, level: MetadataLevel) -> Dict[str, object]:
    out: Dict[str, object] = {"id": node.id, "parent": node.parent, "depth": node.depth}
    if node.is_leaf:
        out["leaf"] = True
    else:
        out["rule"] = node.rule.to_dict()
        out["children"] = list(node.children)
    if level is MetadataLevel.FULL:
        values = node.values
        if np.issubdtype(np.asarray(values).dtype, np.number):
            out["values"] = [float(v) for v in values]
        else:
            out["values"] = [str(v) for v in values]
        out["deviance"] = node.deviance
        out["support"] = _support_to_dict(node)
    return out


def tree_to_dict(tree: CartTree, level: MetadataLevel) -> Dict[str, object]:
    """
    Serialize a tree at a disclosure level.

    Args:
        tree: Fitted tree
        level: RULES_ONLY or FULL (EMPTY yields an empty mapping)

    Returns:
        JSON-ready dictionary
    """
    level = MetadataLevel(level)
    if level is MetadataLevel.EMPTY:
        return {}
    nodes: List[Dict[str, object]] = [_node_to_dict(node, level) for node in tree.nodes]
    return {
        "response": tree.response,
        "response_kind": tree.response_kind.value,
        "predictors": list(tree.predictors),
        "params": tree.params.to_dict(),
        "nodes": nodes,
    }
