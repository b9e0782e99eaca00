"""
Regression / Classification Trees
Greedy binary partitioning by deviance, with minimum node size and upward-fallback leaf search.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import xlogy

from src.data.schema import Dataset, VariableKind
from src.errors import ConfigError, SchemaError
from src.utils.logger import get_logger

logger = get_logger(__name__)

Support = Union[Tuple[float, float], FrozenSet[str]]


@dataclass(frozen=True)
class TreeParams:
    """
    Stopping rules for tree growth.

    Attributes:
        min_node_size: Fewest rows allowed in any child
        min_dev_fraction: Stop when node deviance < fraction x root deviance
        absolute_min_dev: If set, stop when node deviance < this value instead
    """

    min_node_size: int = 5
    min_dev_fraction: float = 1e-4
    absolute_min_dev: Optional[float] = None

    def __post_init__(self):
        if self.min_node_size < 1:
            raise ConfigError(f"min_node_size must be >= 1 (got {self.min_node_size})")
        if self.min_dev_fraction < 0:
            raise ConfigError(f"min_dev_fraction must be >= 0 (got {self.min_dev_fraction})")
        if self.absolute_min_dev is not None and self.absolute_min_dev < 0:
            raise ConfigError(f"absolute_min_dev must be >= 0 (got {self.absolute_min_dev})")

    def to_dict(self) -> Dict[str, object]:
        return {
            "min_node_size": self.min_node_size,
            "min_dev_fraction": self.min_dev_fraction,
            "absolute_min_dev": self.absolute_min_dev,
        }


@dataclass(frozen=True)
class SplitRule:
    """
    Binary split on one variable.

    Left receives value < threshold (numeric) or value in categories (categorical);
    everything else, including categories never seen in training, goes right.
    """

    variable: str
    threshold: Optional[float] = None
    categories: Optional[FrozenSet[str]] = None

    @property
    def is_numeric(self) -> bool:
        return self.threshold is not None

    def goes_left(self, value) -> bool:
        if self.is_numeric:
            return float(value) < self.threshold
        return str(value) in self.categories

    def left_mask(self, values: np.ndarray) -> np.ndarray:
        if self.is_numeric:
            return np.asarray(values, dtype=np.float64) < self.threshold
        return np.isin(np.asarray(values, dtype=object).astype(str), list(self.categories))

    def to_dict(self) -> Dict[str, object]:
        if self.is_numeric:
            return {"variable": self.variable, "threshold": self.threshold}
        return {"variable": self.variable, "categories": sorted(self.categories)}

    def __str__(self) -> str:
        if self.is_numeric:
            return f"{self.variable} < {self.threshold:g}"
        return f"{self.variable} in {{{', '.join(sorted(self.categories))}}}"


@dataclass
class CartNode:
    """
    Tree node. Leaves have neither rule nor children.

    Attributes:
        id: Position in CartTree.nodes
        parent: Parent id (None at the root)
        depth: Root is 0
        rule: Split rule (internal nodes only)
        children: (left id, right id) for internal nodes
        member_rows: Record ids of training rows reaching this node
        positions: Positional indices of the same rows in the training dataset
        deviance: Deviance of the node's response values
        values: Response values of member rows (the leaf multiset)
        support: Per predictor, observed (min, max) or set of levels at this node
    """

    id: int
    parent: Optional[int]
    depth: int
    member_rows: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    deviance: float
    values: np.ndarray = field(repr=False)
    support: Dict[str, Support] = field(repr=False, default_factory=dict)
    rule: Optional[SplitRule] = None
    children: Optional[Tuple[int, int]] = None

    @property
    def is_leaf(self) -> bool:
        return self.rule is None

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def value_range(self) -> Tuple[float, float]:
        values = np.asarray(self.values, dtype=np.float64)
        return float(values.min()), float(values.max())

    def covers(self, name: str, value) -> bool:
        """True when `value` lies inside this node's observed support of predictor `name`."""
        support = self.support[name]
        if isinstance(support, frozenset):
            return str(value) in support
        lo, hi = support
        return lo <= float(value) <= hi


@dataclass
class CartTree:
    """
    Fitted tree. Treat as immutable once returned by fit_tree.

    Attributes:
        response: Response variable
        predictors: Predictor variables in tie-breaking order
        response_kind: Continuous (regression) or categorical (classification)
        response_levels: Levels of a categorical response
        params: Stopping rules used for the fit
        nodes: All nodes, root first
    """

    response: str
    predictors: Tuple[str, ...]
    response_kind: VariableKind
    response_levels: Tuple[str, ...]
    params: TreeParams
    nodes: List[CartNode] = field(repr=False)
    predictor_kinds: Dict[str, VariableKind] = field(repr=False, default_factory=dict)

    @property
    def root(self) -> CartNode:
        return self.nodes[0]

    @property
    def is_regression(self) -> bool:
        return self.response_kind is VariableKind.CONTINUOUS

    def leaves(self) -> List[CartNode]:
        return [node for node in self.nodes if node.is_leaf]

    def depth(self) -> int:
        return max(node.depth for node in self.nodes)

    def path(self, record: Mapping[str, object]) -> List[CartNode]:
        """Nodes visited from the root down to the record's leaf."""
        node = self.root
        visited = [node]
        while not node.is_leaf:
            left, right = node.children
            node = self.nodes[left] if node.rule.goes_left(record[node.rule.variable]) else self.nodes[right]
            visited.append(node)
        return visited

    def route(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        """
        Leaf id for every row of a column mapping (vectorized find_leaf).

        Args:
            columns: Predictor name -> values (all the same length)

        Returns:
            Integer array of leaf ids
        """
        n = len(next(iter(columns.values()))) if columns else 0
        out = np.zeros(n, dtype=np.int64)
        stack = [(0, np.arange(n))]
        while stack:
            node_id, rows = stack.pop()
            node = self.nodes[node_id]
            if node.is_leaf or len(rows) == 0:
                out[rows] = node_id
                continue
            mask = node.rule.left_mask(np.asarray(columns[node.rule.variable])[rows])
            left, right = node.children
            stack.append((right, rows[~mask]))
            stack.append((left, rows[mask]))
        return out

    def route_with_fallback(self, columns: Mapping[str, np.ndarray], check: Sequence[str]) -> np.ndarray:
        """
        Vectorized find_leaf_with_fallback using the standard support check.

        Each row climbs from its leaf until every variable in `check` lies within
        the node's observed support; the root always accepts.
        """
        current = self.route(columns)
        if not check:
            return current
        pending = np.ones(len(current), dtype=bool)
        while pending.any():
            for node_id in np.unique(current[pending]):
                rows = np.flatnonzero(pending & (current == node_id))
                node = self.nodes[node_id]
                if node.parent is None:
                    pending[rows] = False
                    continue
                ok = np.ones(len(rows), dtype=bool)
                for name in check:
                    ok &= _covers_many(node.support[name], np.asarray(columns[name])[rows])
                pending[rows[ok]] = False
                current[rows[~ok]] = node.parent
        return current

    def __repr__(self) -> str:
        return (
            f"CartTree(response={self.response}, nodes={len(self.nodes)}, "
            f"leaves={len(self.leaves())}, depth={self.depth()})"
        )


def _covers_many(support: Support, values: np.ndarray) -> np.ndarray:
    if isinstance(support, frozenset):
        return np.isin(values.astype(str), list(support))
    lo, hi = support
    values = values.astype(np.float64)
    return (values >= lo) & (values <= hi)


def node_deviance(values: Sequence, categorical: Optional[bool] = None) -> float:
    """
    Deviance of a response multiset.

    Regression: sum of squared deviations from the mean.
    Classification: -2 * sum_k n_k log(n_k / n), with 0 log 0 = 0.

    Args:
        values: Nonempty multiset of response values
        categorical: Force classification; inferred from dtype when None

    Returns:
        Nonnegative deviance
    """
    array = np.asarray(values)
    if array.size == 0:
        raise ValueError("deviance of an empty multiset is undefined")
    if categorical is None:
        categorical = not np.issubdtype(array.dtype, np.number)
    if categorical:
        _, counts = np.unique(array.astype(str), return_counts=True)
        return _class_deviance(counts.astype(np.float64))
    array = array.astype(np.float64)
    return float(max(0.0, np.sum((array - array.mean()) ** 2)))


def _class_deviance(counts: np.ndarray) -> float:
    total = counts.sum(axis=-1)
    return float(np.maximum(0.0, 2.0 * (xlogy(total, total) - xlogy(counts, counts).sum(axis=-1))))


def _class_deviance_many(counts: np.ndarray) -> np.ndarray:
    total = counts.sum(axis=1)
    return np.maximum(0.0, 2.0 * (xlogy(total, total) - xlogy(counts, counts).sum(axis=1)))


@dataclass
class _Design:
    names: Tuple[str, ...]
    kinds: Tuple[VariableKind, ...]
    columns: Tuple[np.ndarray, ...]        # floats or integer codes
    levels: Tuple[Tuple[str, ...], ...]    # per categorical predictor
    y: np.ndarray                          # floats or integer codes
    n_classes: int
    response_levels: Tuple[str, ...] = ()


class _TreeBuilder:
    """Holds the design and grows the node list; one instance per fit."""

    def __init__(self, design: _Design, params: TreeParams, record_ids: np.ndarray):
        self.design = design
        self.params = params
        self.record_ids = record_ids
        self.regression = design.n_classes == 0
        self.nodes: List[CartNode] = []

    def deviance(self, rows: np.ndarray) -> float:
        y = self.design.y[rows]
        if self.regression:
            return float(max(0.0, np.sum((y - y.mean()) ** 2)))
        return _class_deviance(np.bincount(y, minlength=self.design.n_classes).astype(np.float64))

    def make_node(self, rows: np.ndarray, parent: Optional[int], depth: int) -> CartNode:
        support: Dict[str, Support] = {}
        for name, kind, column, levels in zip(
            self.design.names, self.design.kinds, self.design.columns, self.design.levels
        ):
            values = column[rows]
            if kind is VariableKind.CONTINUOUS:
                support[name] = (float(values.min()), float(values.max()))
            else:
                support[name] = frozenset(levels[code] for code in np.unique(values))
        if self.regression:
            values = self.design.y[rows].copy()
        else:
            values = np.asarray(self.design.response_levels, dtype=object)[self.design.y[rows]]
        node = CartNode(
            id=len(self.nodes),
            parent=parent,
            depth=depth,
            member_rows=self.record_ids[rows],
            positions=rows,
            deviance=self.deviance(rows),
            values=values,
            support=support,
        )
        self.nodes.append(node)
        return node

    def grow(self) -> None:
        n = len(self.design.y)
        root = self.make_node(np.arange(n), parent=None, depth=0)
        if self.params.absolute_min_dev is not None:
            threshold = self.params.absolute_min_dev
        else:
            threshold = self.params.min_dev_fraction * root.deviance

        stack = [root]
        while stack:
            node = stack.pop()
            if node.deviance <= 0.0 or node.deviance < threshold:
                continue
            if node.n < 2 * self.params.min_node_size:
                continue
            best = self.best_split(node.positions, node.deviance)
            if best is None:
                continue
            rule, left_mask = best
            left = self.make_node(node.positions[left_mask], node.id, node.depth + 1)
            right = self.make_node(node.positions[~left_mask], node.id, node.depth + 1)
            node.rule = rule
            node.children = (left.id, right.id)
            stack.append(right)
            stack.append(left)

    def best_split(self, rows: np.ndarray, node_dev: float) -> Optional[Tuple[SplitRule, np.ndarray]]:
        tolerance = 1e-9 * max(1.0, node_dev)
        best_score = np.inf
        best: Optional[Tuple[SplitRule, np.ndarray]] = None
        for index, kind in enumerate(self.design.kinds):
            if kind is VariableKind.CONTINUOUS:
                found = self._numeric_split(index, rows)
            else:
                found = self._categorical_split(index, rows)
            if found is None:
                continue
            score, rule, mask = found
            if score < best_score - tolerance:
                best_score, best = score, (rule, mask)
        return best

    def _child_deviances(self, y_sorted: np.ndarray) -> np.ndarray:
        """Deviance of left prefix + right suffix for every cut position 1..n-1."""
        n = len(y_sorted)
        k = np.arange(1, n)
        if self.regression:
            centered = y_sorted - y_sorted.mean()
            cs = np.cumsum(centered)[:-1]
            cs2 = np.cumsum(centered ** 2)[:-1]
            total, total2 = centered.sum(), (centered ** 2).sum()
            left = np.maximum(0.0, cs2 - cs ** 2 / k)
            right = np.maximum(0.0, (total2 - cs2) - (total - cs) ** 2 / (n - k))
            return left + right
        onehot = np.zeros((n, self.design.n_classes))
        onehot[np.arange(n), y_sorted] = 1.0
        counts = np.cumsum(onehot, axis=0)[:-1]
        return _class_deviance_many(counts) + _class_deviance_many(counts[-1] + onehot[-1] - counts)

    def _numeric_split(self, index: int, rows: np.ndarray):
        x = self.design.columns[index][rows]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        n = len(xs)
        m = self.params.min_node_size
        scores = self._child_deviances(self.design.y[rows][order])
        cut = np.arange(1, n)
        valid = (cut >= m) & (n - cut >= m) & (xs[:-1] < xs[1:])
        if not valid.any():
            return None
        candidates = np.flatnonzero(valid)
        pick = candidates[np.argmin(scores[candidates])]
        threshold = float((xs[pick] + xs[pick + 1]) / 2.0)
        if not xs[pick] < threshold:  # adjacent floats: midpoint rounds onto the lower value
            threshold = float(xs[pick + 1])
        rule = SplitRule(self.design.names[index], threshold=threshold)
        return float(scores[pick]), rule, x < threshold

    def _categorical_split(self, index: int, rows: np.ndarray):
        codes = self.design.columns[index][rows]
        present, inverse, counts = np.unique(codes, return_inverse=True, return_counts=True)
        if len(present) < 2:
            return None
        y = self.design.y[rows]
        if self.regression:
            means = np.bincount(inverse, weights=y) / counts
            order = np.lexsort((present, means))
        else:
            first_class = np.bincount(inverse, weights=(y == 0).astype(np.float64)) / counts
            order = np.lexsort((present, first_class))

        # rows sorted by level rank, so every ordered level prefix is a row prefix
        rank = np.empty(len(present), dtype=np.int64)
        rank[order] = np.arange(len(present))
        row_order = np.argsort(rank[inverse], kind="stable")
        scores = self._child_deviances(y[row_order])
        prefix_sizes = np.cumsum(counts[order])[:-1]
        m = self.params.min_node_size
        n = len(rows)
        valid = (prefix_sizes >= m) & (n - prefix_sizes >= m)
        if not valid.any():
            return None
        prefix_scores = scores[prefix_sizes - 1]
        candidates = np.flatnonzero(valid)
        pick = candidates[np.argmin(prefix_scores[candidates])]
        left_codes = present[order[: pick + 1]]
        levels = self.design.levels[index]
        rule = SplitRule(self.design.names[index], categories=frozenset(levels[c] for c in left_codes))
        return float(prefix_scores[pick]), rule, np.isin(codes, left_codes)


def _encode(ds: Dataset, name: str) -> Tuple[VariableKind, np.ndarray, Tuple[str, ...]]:
    spec = ds.schema[name]
    if spec.is_continuous:
        return spec.kind, ds.column(name).astype(np.float64), ()
    lookup = {level: code for code, level in enumerate(spec.levels)}
    codes = np.fromiter((lookup[value] for value in ds.column(name)), dtype=np.int64, count=ds.n)
    return spec.kind, codes, spec.levels


def fit_tree(
    ds: Dataset,
    response: str,
    predictors: Sequence[str],
    params: Optional[TreeParams] = None,
) -> CartTree:
    """
    Fit a regression (continuous response) or classification (categorical response) tree.

    At each node the split minimizing total child deviance over all predictors is
    chosen; ties go to the earlier predictor, then the smaller threshold. Growth
    stops at pure nodes, below the deviance threshold, or when no split leaves
    both children with min_node_size rows. No pruning.

    Args:
        ds: Training data
        response: Response variable
        predictors: Predictor variables (order breaks ties)
        params: Stopping rules (defaults: min node 5, relative min deviance 1e-4)

    Returns:
        Fitted CartTree
    """
    params = params or TreeParams()
    if response not in ds.schema:
        raise SchemaError("unknown response", column=response)
    predictors = tuple(predictors)
    for name in predictors:
        if name not in ds.schema:
            raise SchemaError("unknown predictor", column=name)
        if name == response:
            raise ConfigError(f"response '{response}' cannot also be a predictor")

    kinds, columns, levels = [], [], []
    for name in predictors:
        kind, column, lv = _encode(ds, name)
        kinds.append(kind)
        columns.append(column)
        levels.append(lv)
    response_kind, y, response_levels = _encode(ds, response)

    design = _Design(
        names=predictors,
        kinds=tuple(kinds),
        columns=tuple(columns),
        levels=tuple(levels),
        y=y,
        n_classes=len(response_levels),
        response_levels=response_levels,
    )
    builder = _TreeBuilder(design, params, ds.record_ids)
    builder.grow()

    tree = CartTree(
        response=response,
        predictors=predictors,
        response_kind=response_kind,
        response_levels=response_levels,
        params=params,
        nodes=builder.nodes,
        predictor_kinds=dict(zip(predictors, kinds)),
    )
    logger.debug(f"Fitted {tree!r}")
    return tree


def find_leaf(tree: CartTree, record: Mapping[str, object]) -> CartNode:
    """
    The unique leaf reached by applying split rules from the root.

    Args:
        tree: Fitted tree
        record: Values for every predictor the tree splits on

    Returns:
        Leaf node
    """
    return tree.path(record)[-1]


def find_leaf_with_fallback(
    tree: CartTree,
    record: Mapping[str, object],
    support_check: Callable[[CartNode, Mapping[str, object]], bool],
) -> CartNode:
    """
    Descend to the record's leaf, then climb toward the root until `support_check`
    passes; the root is always accepted.

    Args:
        tree: Fitted tree
        record: Values for every predictor the tree splits on
        support_check: predicate(node, record)

    Returns:
        The leaf, or its nearest ancestor that contains the record
    """
    for node in reversed(tree.path(record)):
        if node.parent is None or support_check(node, record):
            return node
    return tree.root


def within_support(names: Sequence[str]) -> Callable[[CartNode, Mapping[str, object]], bool]:
    """Support check: every listed predictor of the record lies within the node's observed support."""
    names = tuple(names)

    def check(node: CartNode, record: Mapping[str, object]) -> bool:
        return all(node.covers(name, record[name]) for name in names)

    return check
