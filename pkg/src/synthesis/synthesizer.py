"""
Sequential CART Synthesizer
Replaces geography (and optionally attributes) with draws from trees fit on the original data.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.cart.export import MetadataLevel, tree_to_dict
from src.cart.tree import CartTree, TreeParams, fit_tree
from src.data.schema import Dataset, Schema
from src.synthesis.plan import SynthesisPlan
from src.synthesis.sampling import bootstrap_weights, kernel_sample_many
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class SyntheticRelease:
    """
    The m partially synthetic datasets plus what the agency discloses about them.

    Attributes:
        datasets: Replicates 1..m, same schema and record ids as the original
        plan: Plan that produced them
        metadata_level: Disclosure level of the metadata file
        trees: Tree per synthesized variable (fit once on the original)
        node_ids: Per replicate, variable -> generating node id of every record
    """

    datasets: List[Dataset] = field(repr=False)
    plan: SynthesisPlan
    metadata_level: MetadataLevel
    trees: Dict[str, CartTree] = field(repr=False)
    node_ids: List[Dict[str, np.ndarray]] = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.datasets)

    @property
    def schema(self) -> Schema:
        return self.datasets[0].schema

    def bandwidth(self, name: str) -> float:
        return self.plan.bandwidth(name, self.schema)

    def metadata(self) -> Dict[str, object]:
        """
        Metadata document at this release's disclosure level.

        EMPTY keeps only the synthesized variable names, m and the level;
        RULES_ONLY adds bandwidths, tree settings and split rules;
        FULL also adds every node's original values.
        """
        out: Dict[str, object] = {
            "metadata_level": self.metadata_level.name,
            "m": self.m,
            "order": list(self.plan.order),
            "seed": self.plan.seed,
        }
        if self.metadata_level is MetadataLevel.EMPTY:
            return out
        out["plan"] = self.plan.to_dict()
        out["bandwidths"] = {name: self.bandwidth(name) for name in self.plan.order}
        out["trees"] = {name: tree_to_dict(tree, self.metadata_level) for name, tree in self.trees.items()}
        return out

    def __repr__(self) -> str:
        return f"SyntheticRelease(m={self.m}, order={list(self.plan.order)}, level={self.metadata_level.name})"


def _predictor_columns(
    ds: Dataset,
    predictors: Sequence[str],
    already_synthesized: Mapping[str, np.ndarray],
) -> Tuple[Dict[str, np.ndarray], List[str]]:
    columns = {}
    synthetic = []
    for name in predictors:
        if name in already_synthesized:
            columns[name] = np.asarray(already_synthesized[name])
            synthetic.append(name)
        else:
            columns[name] = ds.column(name)
    return columns, synthetic


def locate_nodes(
    tree: CartTree,
    ds: Dataset,
    already_synthesized: Mapping[str, np.ndarray],
) -> np.ndarray:
    """
    Generating node of every record: its leaf under the original predictors with
    synthetic values substituted, climbing until the synthetic values fall inside
    the node's observed support.
    """
    columns, synthetic = _predictor_columns(ds, tree.predictors, already_synthesized)
    return tree.route_with_fallback(columns, synthetic)


def _draw_from_nodes(
    tree: CartTree,
    node_ids: np.ndarray,
    h: float,
    rng: np.random.Generator,
    per_record: bool,
) -> np.ndarray:
    if tree.is_regression:
        out = np.empty(len(node_ids), dtype=np.float64)
    else:
        out = np.empty(len(node_ids), dtype=object)
    for node_id in np.unique(node_ids):
        rows = np.flatnonzero(node_ids == node_id)
        node = tree.nodes[node_id]
        atoms = node.values
        k = len(atoms)
        if per_record:
            picks = np.array([rng.choice(k, p=bootstrap_weights(k, rng)) for _ in rows], dtype=np.int64)
        else:
            picks = rng.choice(k, size=len(rows), replace=True, p=bootstrap_weights(k, rng))
        centers = atoms[picks]
        if tree.is_regression:
            out[rows] = kernel_sample_many(centers, h, node.value_range, rng)
        else:
            out[rows] = centers
    return out


def synthesize_column(
    ds: Dataset,
    target: str,
    predictors: Sequence[str],
    already_synthesized: Mapping[str, np.ndarray],
    h: float,
    tree_params: Optional[TreeParams],
    rng: np.random.Generator,
    tree: Optional[CartTree] = None,
    per_record_bootstrap: bool = False,
) -> np.ndarray:
    """
    Synthetic replacement for one column.

    The tree is fit on the original data (true predictor values). Each record is
    then located using synthetic values for predictors already synthesized, the
    node's values are Bayesian-bootstrapped, and a continuous target is smoothed
    with a Gaussian kernel truncated to the node's value range.

    Args:
        ds: Original data
        target: Column to replace
        predictors: Conditioning variables (exclude target)
        already_synthesized: Synthetic values of earlier plan variables
        h: Kernel bandwidth (ignored for categorical targets)
        tree_params: Stopping rules, used when `tree` is not given
        rng: Random generator
        tree: Pre-fitted tree to reuse across replicates
        per_record_bootstrap: Fresh bootstrap weights for each record

    Returns:
        Synthetic column, aligned with ds rows
    """
    if tree is None:
        tree = fit_tree(ds, target, predictors, tree_params)
    node_ids = locate_nodes(tree, ds, already_synthesized)
    return _draw_from_nodes(tree, node_ids, h, rng, per_record_bootstrap)


def fit_plan_trees(ds: Dataset, plan: SynthesisPlan) -> Dict[str, CartTree]:
    """Fit every tree the plan needs on the original data."""
    plan.validate(ds.schema)
    trees = {}
    for name in plan.order:
        predictors = plan.predictors_for(ds.schema, name)
        trees[name] = fit_tree(ds, name, predictors, plan.params_for(name))
        logger.info(
            f"Fitted tree for '{name}' on {len(predictors)} predictors: "
            f"{len(trees[name].leaves())} leaves, depth {trees[name].depth()}"
        )
    return trees


def _generate_replicate(
    ds: Dataset,
    plan: SynthesisPlan,
    trees: Mapping[str, CartTree],
    replicate: int,
) -> Tuple[Dataset, Dict[str, np.ndarray]]:
    rng = np.random.default_rng([plan.seed, replicate])
    synthetic: Dict[str, np.ndarray] = {}
    node_ids: Dict[str, np.ndarray] = {}
    for name in plan.order:
        tree = trees[name]
        node_ids[name] = locate_nodes(tree, ds, synthetic)
        synthetic[name] = _draw_from_nodes(
            tree, node_ids[name], plan.bandwidth(name, ds.schema), rng, plan.per_record_bootstrap
        )
    logger.debug(f"Replicate {replicate + 1} finished")
    return ds.with_columns(synthetic), node_ids


def generate_release(
    ds: Dataset,
    plan: SynthesisPlan,
    metadata_level: MetadataLevel = MetadataLevel.RULES_ONLY,
    workers: Optional[int] = None,
) -> SyntheticRelease:
    """
    Generate m partially synthetic datasets.

    Trees are fit once; replicates are drawn concurrently, replicate l from the
    RNG stream seeded (plan.seed, l), so the output does not depend on scheduling.

    Args:
        ds: Original data
        plan: Synthesis plan (validated against ds.schema)
        metadata_level: Disclosure level recorded on the release
        workers: Thread count (None lets the executor decide)

    Returns:
        SyntheticRelease
    """
    trees = fit_plan_trees(ds, plan)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_generate_replicate, ds, plan, trees, l) for l in range(plan.m)]
        results = [future.result() for future in futures]
    logger.info(f"Generated {plan.m} synthetic datasets of {ds.n} records (synthesized {list(plan.order)})")
    return SyntheticRelease(
        datasets=[dataset for dataset, _ in results],
        plan=plan,
        metadata_level=MetadataLevel(metadata_level),
        trees=trees,
        node_ids=[nodes for _, nodes in results],
    )


def rebuild_release(
    ds: Dataset,
    datasets: Sequence[Dataset],
    plan: SynthesisPlan,
    metadata_level: MetadataLevel,
) -> SyntheticRelease:
    """
    Reattach trees and generating nodes to a release read back from disk.

    Fitting is deterministic, so refitting on the original reproduces the
    release's trees exactly.
    """
    trees = fit_plan_trees(ds, plan)
    node_ids = []
    for synth in datasets:
        located: Dict[str, np.ndarray] = {}
        earlier: Dict[str, np.ndarray] = {}
        for name in plan.order:
            located[name] = locate_nodes(trees[name], ds, earlier)
            earlier[name] = synth.column(name)
        node_ids.append(located)
    return SyntheticRelease(
        datasets=list(datasets),
        plan=plan,
        metadata_level=MetadataLevel(metadata_level),
        trees=trees,
        node_ids=node_ids,
    )
