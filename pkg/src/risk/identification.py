"""
Identification Risk
Monte Carlo match probabilities of an intruder linking a known target to released records.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.cart.export import MetadataLevel
from src.data.schema import Dataset
from src.errors import ConfigError
from src.risk.scenario import IntruderScenario
from src.synthesis.sampling import bootstrap_weights, kernel_sample_many
from src.synthesis.synthesizer import SyntheticRelease
from src.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_MC_DRAWS = 50


@dataclass(frozen=True)
class MatchRiskSummary:
    """
    Release-level identification risk.

    Attributes:
        expected: Expected share of targets correctly identified
        true_rate: Share of targets with a unique, correct best match
        false_rate: Share of unique best matches that are wrong (None when there are none)
        targets: Number of targets
    """

    expected: float
    true_rate: float
    false_rate: Optional[float]
    targets: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "expected": self.expected,
            "true_rate": self.true_rate,
            "false_rate": self.false_rate,
            "targets": self.targets,
        }


def _key_part(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _key(values) -> str:
    return "\x1f".join(_key_part(v) for v in values)


class IdentificationAttack:
    """
    Match-probability engine for one release and scenario.

    Imputations of the synthesized quasi-identifiers are drawn once per
    replicate and shared by every target.
    """

    def __init__(
        self,
        release: SyntheticRelease,
        scenario: IntruderScenario,
        mc_draws: int = DEFAULT_MC_DRAWS,
        seed: int = 0,
    ):
        if mc_draws < 1:
            raise ConfigError(f"mc_draws must be >= 1 (got {mc_draws})")
        keys = scenario.known_quasi_identifiers
        if not keys:
            raise ConfigError("identification attack needs at least one known quasi-identifier")
        schema = release.schema
        for name in keys:
            if name not in schema:
                raise ConfigError(f"unknown quasi-identifier '{name}'")

        self.release = release
        self.scenario = scenario
        self.mc_draws = mc_draws
        self.n = release.datasets[0].n
        synthesized = set(release.plan.order)
        geography = set(schema.geography)
        self.fixed_keys = [k for k in keys if k not in synthesized]
        self.imputed_categorical = [k for k in keys if k in synthesized and schema[k].is_categorical]
        self.imputed_geography = [k for k in keys if k in synthesized and k in geography]
        self.imputed_continuous = [
            k for k in keys if k in synthesized and schema[k].is_continuous and k not in geography
        ]
        self.imputed = self.imputed_categorical + self.imputed_geography + self.imputed_continuous

        frame = release.datasets[0].frame
        if self.fixed_keys:
            labels = np.array([_key(row) for row in frame[self.fixed_keys].itertuples(index=False)], dtype=object)
            self.groups = pd.Series(np.arange(self.n)).groupby(labels).indices
        else:
            self.groups = None

        rng = np.random.default_rng([seed, 1])
        self.imputations = [self._impute(l, rng) for l in range(release.m)]
        logger.debug(
            f"Identification attack ready: fixed keys {self.fixed_keys}, imputed {self.imputed}, "
            f"{release.m} x {mc_draws} imputations"
        )

    def _impute(self, l: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        level = self.scenario.metadata_level
        out = {}
        picks = None
        if level is MetadataLevel.EMPTY:
            # one replicate per record and draw, shared by every imputed key
            picks = rng.integers(self.release.m, size=(self.mc_draws, self.n))
        for name in self.imputed:
            if level is MetadataLevel.FULL:
                out[name] = self._impute_from_synthesizer(l, name, rng)
            elif level is MetadataLevel.RULES_ONLY:
                out[name] = self._impute_from_node_pool(l, name, rng)
            else:
                out[name] = self._impute_from_own_values(name, picks)
        return out

    def _empty_draws(self, name: str) -> np.ndarray:
        if self.release.schema[name].is_categorical:
            return np.empty((self.mc_draws, self.n), dtype=object)
        return np.empty((self.mc_draws, self.n), dtype=np.float64)

    def _impute_from_synthesizer(self, l: int, name: str, rng: np.random.Generator) -> np.ndarray:
        """Fresh draws from the generating node's original values, as the synthesizer makes them."""
        tree = self.release.trees[name]
        node_ids = self.release.node_ids[l][name]
        h = self.release.bandwidth(name)
        out = self._empty_draws(name)
        for node_id in np.unique(node_ids):
            rows = np.flatnonzero(node_ids == node_id)
            node = tree.nodes[node_id]
            for d in range(self.mc_draws):
                picks = rng.choice(node.n, size=len(rows), p=bootstrap_weights(node.n, rng))
                centers = node.values[picks]
                if tree.is_regression:
                    out[d, rows] = kernel_sample_many(centers, h, node.value_range, rng)
                else:
                    out[d, rows] = centers
        return out

    def _impute_from_node_pool(self, l: int, name: str, rng: np.random.Generator) -> np.ndarray:
        """Draws from the synthetic values that all replicates placed in the same node."""
        node_ids = self.release.node_ids[l][name]
        pooled_values = np.concatenate([synth.column(name) for synth in self.release.datasets])
        pooled_nodes = np.concatenate([ids[name] for ids in self.release.node_ids])
        out = self._empty_draws(name)
        for node_id in np.unique(node_ids):
            rows = np.flatnonzero(node_ids == node_id)
            pool = pooled_values[pooled_nodes == node_id]
            out[:, rows] = pool[rng.integers(len(pool), size=(self.mc_draws, len(rows)))]
        return out

    def _impute_from_own_values(self, name: str, picks: np.ndarray) -> np.ndarray:
        """Each record's own synthetic value from the replicate chosen in `picks`."""
        own = np.vstack([synth.column(name) for synth in self.release.datasets])
        return own[picks, np.arange(self.n)[None, :]]

    def _candidates(self, target: Mapping[str, object]) -> Optional[np.ndarray]:
        if self.groups is None:
            return np.arange(self.n)
        return self.groups.get(_key(target[k] for k in self.fixed_keys))

    def probabilities(self, target: Mapping[str, object]) -> np.ndarray:
        """
        P(J = j | target) for j over the n records, plus a last entry for
        "target is not in the file".
        """
        for name in self.scenario.known_quasi_identifiers:
            if name not in target:
                raise ConfigError(f"target record lacks quasi-identifier '{name}'")
        probs = np.zeros(self.n + 1)
        positions = self._candidates(target)
        if positions is None or len(positions) == 0:
            if self.scenario.sample_membership_known:
                probs[: self.n] = 1.0 / self.n
            else:
                probs[self.n] = 1.0
            return probs

        for imputed in self.imputations:
            keep = np.ones((self.mc_draws, len(positions)), dtype=bool)
            for name in self.imputed_categorical:
                same = keep & (imputed[name][:, positions] == str(target[name]))
                keep = np.where(same.any(axis=1, keepdims=True), same, keep)
            if self.imputed_geography:
                squared = sum(
                    (imputed[name][:, positions].astype(np.float64) - float(target[name])) ** 2
                    for name in self.imputed_geography
                )
                keep &= _nearest(squared, keep)
            for name in self.imputed_continuous:
                gap = np.abs(imputed[name][:, positions].astype(np.float64) - float(target[name]))
                keep &= _nearest(gap, keep)
            share = keep / keep.sum(axis=1, keepdims=True)
            probs[positions] += share.sum(axis=0)
        probs[: self.n] /= self.release.m * self.mc_draws
        return probs


def _nearest(score: np.ndarray, keep: np.ndarray) -> np.ndarray:
    masked = np.where(keep, score, np.inf)
    best = masked.min(axis=1, keepdims=True)
    return masked <= best + 1e-12 * (1.0 + np.abs(best))


def match_probabilities(
    release: SyntheticRelease,
    target: Mapping[str, object],
    scenario: IntruderScenario,
    mc_draws: int = DEFAULT_MC_DRAWS,
    seed: int = 0,
) -> np.ndarray:
    """
    Monte Carlo match probabilities for one target.

    Records must agree exactly with the target on unsynthesized keys; among
    them, imputed categorical keys must agree, then the smallest geographic
    distance wins, then the smallest gap on other continuous keys. Ties share
    the probability equally.

    Args:
        release: Synthetic release
        target: Values of the scenario's known quasi-identifiers
        scenario: Intruder knowledge (metadata level picks the imputation model)
        mc_draws: Imputations per replicate
        seed: Seed of the imputation stream

    Returns:
        Length n+1 probability vector; the last entry is "not in the file"
    """
    return IdentificationAttack(release, scenario, mc_draws, seed).probabilities(target)


def _best_match_counts(probs: np.ndarray, truth: Optional[int]) -> Tuple[int, int]:
    """(c, g): number of records tied at the top, and whether the truth is among them."""
    records = probs[:-1]
    top = records.max() if len(records) else 0.0
    if top <= 0.0 or probs[-1] > top:
        return 0, 0
    tied = np.isclose(records, top, rtol=1e-9, atol=1e-12)
    c = int(tied.sum())
    g = int(truth is not None and bool(tied[truth]))
    return c, g


def match_risk_summary(
    probabilities: Sequence[np.ndarray],
    truths: Sequence[Optional[int]],
) -> MatchRiskSummary:
    """
    Expected, true and false match risk.

    Args:
        probabilities: One match-probability vector per target
        truths: Position of each target's true record (None if absent)

    Returns:
        MatchRiskSummary
    """
    counts = [_best_match_counts(np.asarray(p, dtype=np.float64), t) for p, t in zip(probabilities, truths)]
    return summary_from_counts([c for c, _ in counts], [g for _, g in counts])


def summary_from_counts(c: Sequence[int], g: Sequence[int]) -> MatchRiskSummary:
    """Risk formulas from per-target tie counts c and correctness indicators g."""
    c = np.asarray(c, dtype=np.int64)
    g = np.asarray(g, dtype=np.int64)
    n = len(c)
    if n == 0:
        raise ConfigError("match risk needs at least one target")
    safe_c = np.where(c > 0, c, 1)
    expected = float(np.sum(g / safe_c) / n)
    k = (c * g == 1).astype(np.int64)
    f = (c == 1).astype(np.int64)
    false_rate = float(np.sum(f * (1 - g)) / f.sum()) if f.sum() else None
    return MatchRiskSummary(expected=expected, true_rate=float(k.sum() / n), false_rate=false_rate, targets=n)


def assess_identification_risk(
    release: SyntheticRelease,
    original: Dataset,
    scenario: IntruderScenario,
    mc_draws: int = DEFAULT_MC_DRAWS,
    seed: int = 0,
    targets: Optional[Sequence[int]] = None,
    workers: Optional[int] = None,
) -> Tuple[pd.DataFrame, MatchRiskSummary]:
    """
    Attack every target with its own true quasi-identifiers.

    Returns:
        Per-target frame (record_id, c, g, p_true, p_outside) and the summary
    """
    attack = IdentificationAttack(release, scenario, mc_draws, seed)
    keys = list(scenario.known_quasi_identifiers)
    ids = original.record_ids
    positions = list(range(original.n)) if targets is None else [int(np.flatnonzero(ids == t)[0]) for t in targets]
    columns = {name: original.column(name) for name in keys}

    def attack_one(position: int) -> np.ndarray:
        return attack.probabilities({name: columns[name][position] for name in keys})

    with ThreadPoolExecutor(max_workers=workers) as pool:
        probabilities: List[np.ndarray] = list(pool.map(attack_one, positions))

    counts = [_best_match_counts(p, pos) for p, pos in zip(probabilities, positions)]
    frame = pd.DataFrame(
        {
            "record_id": [int(ids[pos]) for pos in positions],
            "c": [c for c, _ in counts],
            "g": [g for _, g in counts],
            "p_true": [float(p[pos]) for p, pos in zip(probabilities, positions)],
            "p_outside": [float(p[-1]) for p in probabilities],
        }
    )
    summary = summary_from_counts(frame["c"], frame["g"])
    false_text = "n/a" if summary.false_rate is None else f"{summary.false_rate:.3f}"
    logger.info(
        f"Identification risk ({scenario.describe()}, keys {keys}): expected={summary.expected:.3f}, "
        f"true={summary.true_rate:.3f}, false={false_text}"
    )
    return frame, summary
