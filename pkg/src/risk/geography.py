"""
Geography Recovery Risk
Posterior over a target's true location given the release, and the R1/R2 distance metrics.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from src.cart.tree import CartNode, CartTree
from src.data.schema import Dataset
from src.errors import ConfigError
from src.risk.scenario import IntruderScenario, Knowledge, PriorKind
from src.synthesis.sampling import truncated_kernel_pdf
from src.synthesis.synthesizer import SyntheticRelease
from src.utils.logger import get_logger

logger = get_logger(__name__)

# candidates x atoms evaluated per block
_BLOCK_CELLS = 2_000_000


@dataclass
class GeoPosterior:
    """
    Discrete posterior over candidate locations.

    Attributes:
        support: (K, 2) candidate (longitude, latitude) points
        weights: Probabilities summing to one
        degenerate: Every candidate had zero likelihood; weights fell back to the prior
    """

    support: np.ndarray
    weights: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.float64).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.support) == 0:
            raise ValueError("posterior support is empty")
        if len(self.weights) != len(self.support) or (self.weights < 0).any():
            raise ValueError("posterior weights must be nonnegative, one per support point")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            self.weights = self.weights / self.weights.sum()

    def mean(self) -> np.ndarray:
        return self.weights @ self.support


@dataclass(frozen=True)
class GeoRiskRecord:
    record_id: int
    r1: float
    r2: int
    degenerate: bool = False


def _normalize_log(log_weights: np.ndarray) -> Optional[np.ndarray]:
    top = np.max(log_weights)
    if not np.isfinite(top):
        return None
    weights = np.exp(log_weights - top)
    return weights / weights.sum()


def _mixture_density(
    y: float,
    atoms: np.ndarray,
    extra: np.ndarray,
    member: np.ndarray,
    h: float,
) -> np.ndarray:
    """
    Bayesian-bootstrap-expected kernel density of y over a node's atoms.

    Row k uses the known atoms plus extra[k] when member[k]; the truncation
    window is the min/max of that multiset. Degenerate kernels (h = 0 or a
    single-valued window) fall back to the share of atoms equal to y.
    """
    r = len(atoms)
    n = r + member.astype(np.int64)
    if r:
        a_lo, a_hi = float(atoms.min()), float(atoms.max())
        lo = np.where(member, np.minimum(a_lo, extra), a_lo)
        hi = np.where(member, np.maximum(a_hi, extra), a_hi)
    else:
        lo, hi = extra.copy(), extra.copy()

    out = np.zeros(len(extra))
    valid = n > 0
    discrete = valid & ((h == 0) | (lo == hi))
    if discrete.any():
        equal = float(np.sum(atoms == y))
        out[discrete] = (equal + (member & (extra == y))[discrete]) / n[discrete]

    rows = np.flatnonzero(valid & ~discrete)
    block = max(1, _BLOCK_CELLS // max(r, 1))
    for start in range(0, len(rows), block):
        idx = rows[start:start + block]
        total = np.zeros(len(idx))
        if r:
            total += truncated_kernel_pdf(y, atoms[None, :], h, (lo[idx, None], hi[idx, None])).sum(axis=1)
        own = truncated_kernel_pdf(y, extra[idx], h, (lo[idx], hi[idx]))
        total += np.where(member[idx], own, 0.0)
        out[idx] = total / n[idx]
    return out


class GeographyAttack:
    """
    Evaluates geography posteriors for many targets of one release.

    Trees are held fixed; the high-knowledge likelihood replaces the target's
    contribution to each generating node by the candidate location.
    """

    def __init__(self, release: SyntheticRelease, original: Dataset, scenario: IntruderScenario):
        self.release = release
        self.original = original
        self.scenario = scenario
        self.lon, self.lat = original.schema.geography
        self.geography = [name for name in release.plan.order if name in (self.lon, self.lat)]
        if len(self.geography) != 2:
            raise ConfigError("geography risk needs both longitude and latitude in the synthesis order")
        self.columns = {name: original.column(name) for name in original.schema.names}
        self.synthetic = [
            {name: synth.column(name) for name in self.geography} for synth in release.datasets
        ]
        self.coords = original.coords()
        self._pooled: Optional[np.ndarray] = None

    def position_of(self, record_id: int) -> int:
        hits = np.flatnonzero(self.original.record_ids == record_id)
        if len(hits) == 0:
            raise KeyError(f"record_id {record_id} not in the original data")
        return int(hits[0])

    def _record(self, position: int) -> Dict[str, object]:
        return {name: values[position] for name, values in self.columns.items()}

    def _others(self, node: CartNode, name: str, position: int) -> np.ndarray:
        keep = node.positions != position
        return self.columns[name][node.positions[keep]]

    def _generating_node(
        self,
        tree: CartTree,
        record: Dict[str, object],
        earlier: Dict[str, float],
        position: int,
    ) -> CartNode:
        routed = dict(record)
        routed.update(earlier)
        for node in reversed(tree.path(routed)):
            if node.parent is None:
                return node
            ok = True
            for name, value in earlier.items():
                others = self._others(node, name, position)
                if len(others) == 0 or not (others.min() <= value <= others.max()):
                    ok = False
                    break
            if ok:
                return node
        return tree.root

    @staticmethod
    def _ancestry(tree: CartTree, node: CartNode) -> List[CartNode]:
        chain = [node]
        while chain[-1].parent is not None:
            chain.append(tree.nodes[chain[-1].parent])
        return chain[::-1]

    def _membership(
        self,
        tree: CartTree,
        node: CartNode,
        record: Dict[str, object],
        candidates: Dict[str, np.ndarray],
    ) -> np.ndarray:
        k = len(next(iter(candidates.values())))
        member = np.ones(k, dtype=bool)
        chain = self._ancestry(tree, node)
        for parent, child in zip(chain[:-1], chain[1:]):
            went_left = child.id == parent.children[0]
            variable = parent.rule.variable
            if variable in candidates:
                member &= parent.rule.left_mask(candidates[variable]) == went_left
            elif parent.rule.goes_left(record[variable]) != went_left:
                member[:] = False
        return member

    def log_likelihood(self, position: int, candidates: np.ndarray) -> np.ndarray:
        """Log P(synthetic locations of the target | candidate true location), per candidate."""
        record = self._record(position)
        values = {self.lon: candidates[:, 0], self.lat: candidates[:, 1]}
        total = np.zeros(len(candidates))
        for synthetic in self.synthetic:
            earlier: Dict[str, float] = {}
            for name in self.geography:
                tree = self.release.trees[name]
                node = self._generating_node(tree, record, earlier, position)
                member = self._membership(tree, node, record, values)
                atoms = node.values[node.positions != position].astype(np.float64)
                observed = float(synthetic[name][position])
                density = _mixture_density(observed, atoms, values[name], member, self.release.bandwidth(name))
                with np.errstate(divide="ignore"):
                    total += np.log(density)
                earlier[name] = observed
        return total

    def _prior_support(self, position: int) -> np.ndarray:
        prior = self.scenario.prior
        if prior.kind is PriorKind.EMPIRICAL_SYNTHETIC:
            if self._pooled is None:
                pooled = np.vstack([
                    np.column_stack([synth[self.lon], synth[self.lat]]) for synth in self.synthetic
                ])
                self._pooled = np.unique(pooled, axis=0)
            return self._pooled
        return prior.grid(tuple(self.coords[position]))

    def _high_posterior(self, position: int) -> GeoPosterior:
        support = self._prior_support(position)
        weights = _normalize_log(self.log_likelihood(position, support))
        if weights is None:
            logger.warning(
                f"All candidate likelihoods are zero for record {self.original.record_ids[position]}; "
                f"using the prior"
            )
            return GeoPosterior(support, np.full(len(support), 1.0 / len(support)), degenerate=True)
        return GeoPosterior(support, weights)

    def _low_posterior(self, position: int) -> GeoPosterior:
        points = np.array([[synth[self.lon][position], synth[self.lat][position]] for synth in self.synthetic])
        h_lon = self.release.bandwidth(self.lon)
        h_lat = self.release.bandwidth(self.lat)
        if h_lon == 0 or h_lat == 0:
            return GeoPosterior(points, np.full(len(points), 1.0 / len(points)))

        prior = self.scenario.prior
        xs = np.linspace(points[:, 0].min() - 3 * h_lon, points[:, 0].max() + 3 * h_lon, prior.nx)
        ys = np.linspace(points[:, 1].min() - 3 * h_lat, points[:, 1].max() + 3 * h_lat, prior.ny)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        support = np.column_stack([gx.ravel(), gy.ravel()])
        z_lon = (support[:, 0, None] - points[None, :, 0]) / h_lon
        z_lat = (support[:, 1, None] - points[None, :, 1]) / h_lat
        weights = np.exp(-0.5 * (z_lon ** 2 + z_lat ** 2)).sum(axis=1)
        return GeoPosterior(support, weights / weights.sum())

    def posterior(self, position: int) -> GeoPosterior:
        if self.scenario.knowledge is Knowledge.HIGH:
            return self._high_posterior(position)
        return self._low_posterior(position)

    def risk(self, position: int) -> GeoRiskRecord:
        posterior = self.posterior(position)
        record = geo_risk(posterior, tuple(self.coords[position]), self.original,
                          record_id=int(self.original.record_ids[position]))
        logger.debug(f"Record {record.record_id}: R1={record.r1:.3f}, R2={record.r2}")
        return record


def geo_posterior(
    release: SyntheticRelease,
    original: Dataset,
    target: int,
    scenario: IntruderScenario,
) -> GeoPosterior:
    """
    Posterior over the true location of one record.

    HIGH: weights proportional to prior x likelihood over the prior's candidates.
    LOW: Gaussian-kernel smoothing of the record's m synthetic points on a grid
    spanning them (the points themselves when a bandwidth is zero).

    Args:
        release: Synthetic release with its trees
        original: Original data
        target: record_id of the target
        scenario: Intruder knowledge

    Returns:
        GeoPosterior
    """
    attack = GeographyAttack(release, original, scenario)
    return attack.posterior(attack.position_of(target))


def geo_risk(
    posterior: GeoPosterior,
    truth: Tuple[float, float],
    original: Dataset,
    record_id: int = -1,
) -> GeoRiskRecord:
    """
    R1: root posterior-expected squared distance to the truth.
    R2: original records within distance R1 of the truth.
    """
    truth_point = np.asarray(truth, dtype=np.float64).reshape(1, 2)
    squared = np.sum((posterior.support - truth_point) ** 2, axis=1)
    r1 = float(np.sqrt(max(0.0, posterior.weights @ squared)))
    distances = cdist(original.coords(), truth_point).ravel()
    r2 = int(np.sum(distances <= r1 + 1e-9))
    return GeoRiskRecord(record_id=record_id, r1=r1, r2=r2, degenerate=posterior.degenerate)


def assess_geo_risk(
    release: SyntheticRelease,
    original: Dataset,
    scenario: IntruderScenario,
    targets: Optional[Sequence[int]] = None,
    workers: Optional[int] = None,
) -> pd.DataFrame:
    """
    R1/R2 for many targets.

    Args:
        release: Synthetic release
        original: Original data
        scenario: Intruder knowledge
        targets: record_ids to attack (all records when None)
        workers: Thread count

    Returns:
        DataFrame with record_id, r1, r2, degenerate and scenario columns
    """
    attack = GeographyAttack(release, original, scenario)
    ids = original.record_ids if targets is None else np.asarray(targets)
    positions = [attack.position_of(int(record_id)) for record_id in ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(attack.risk, positions))

    frame = pd.DataFrame(
        {
            "record_id": [r.record_id for r in records],
            "r1": [r.r1 for r in records],
            "r2": [r.r2 for r in records],
            "degenerate": [r.degenerate for r in records],
        }
    )
    frame["scenario"] = scenario.describe()
    flagged = int(frame["degenerate"].sum())
    if flagged:
        logger.warning(f"{flagged} of {len(frame)} targets had an all-zero likelihood")
    logger.info(
        f"Geography risk ({scenario.describe()}, {len(frame)} targets): "
        f"median R1={frame['r1'].median():.3f}, median R2={frame['r2'].median():.1f}"
    )
    return frame


RISK_QUANTILES = (0.0, 0.25, 0.5)


def summarize_geo_risk(records: pd.DataFrame) -> pd.DataFrame:
    """
    Lower quantiles of R1 and R2 per scenario (the 0th, 25th and 50th percentiles).

    Args:
        records: Output of assess_geo_risk, possibly several scenarios concatenated

    Returns:
        One row per scenario with r1_a0, r1_a25, r1_a50, r2_a0, r2_a25, r2_a50
    """
    rows = []
    for scenario, group in records.groupby("scenario", sort=False):
        row: Dict[str, object] = {"scenario": scenario, "targets": len(group)}
        for metric in ("r1", "r2"):
            for q in RISK_QUANTILES:
                row[f"{metric}_a{int(q * 100)}"] = float(group[metric].quantile(q))
        rows.append(row)
    return pd.DataFrame(rows)
