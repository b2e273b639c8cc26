# Copyright 2025 The cscale Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Pairwise and network-wide causal detection, and ROC evaluation against known links

Direction a -> b treats a as the candidate cause: the radius grid and the
neighbour sets come from b's reconstruction (u, the effect) and the
distances being averaged come from a's (v, the cause).
"""

import hashlib
import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from sklearn.metrics import auc, roc_curve

from config.detection_config import DetectionConfig
from core.embedding import EmbeddedSeries, EmbeddingParams, ScalarSeries, delay_embed, select_embedding, truncate_common
from core.errors import ContinuityScalingError, InputSizeError, PairError, UndefinedRocError
from core.scaling import (
    NeighborhoodSpec,
    ScalingCurve,
    SlopeEstimate,
    build_shell_table,
    default_theiler_window,
    delta_profile,
    estimate_slope,
    grid_for,
)
from core.significance import PValueResult, surrogate_p_value

logger = logging.getLogger(__name__)

Edge = Tuple[str, str]


@dataclass(frozen=True, eq=False)
class CausalityResult:
    """Slope and significance of one direction cause -> effect."""

    cause: str
    effect: str
    slope: float
    p_value: float
    significant: bool
    curve: ScalingCurve = field(repr=False)
    fit: SlopeEstimate = field(repr=False)
    pvalue: PValueResult = field(repr=False)
    cause_embedding: Optional[EmbeddingParams] = None
    effect_embedding: Optional[EmbeddingParams] = None
    theiler_window: int = 0
    dd_condition: bool = False

    @property
    def direction(self) -> Edge:
        return (self.cause, self.effect)


@dataclass(frozen=True, eq=False)
class CausalNetwork:
    """All ordered pairs of a series table; failed pairs are kept in `errors`."""

    labels: Tuple[str, ...]
    results: Dict[Edge, CausalityResult]
    errors: Dict[Edge, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.results) + len(self.errors)

    def slope_scores(self) -> Dict[Edge, float]:
        return {edge: r.slope for edge, r in self.results.items()}

    def significant_edges(self) -> Set[Edge]:
        return {edge for edge, r in self.results.items() if r.significant}

    def slope_matrix(self) -> np.ndarray:
        """N x N slopes, row = cause, column = effect; NaN on the diagonal and for failed pairs."""
        index = {label: i for i, label in enumerate(self.labels)}
        matrix = np.full((len(self.labels), len(self.labels)), np.nan)
        for (cause, effect), result in self.results.items():
            matrix[index[cause], index[effect]] = result.slope
        return matrix


@dataclass(frozen=True, eq=False)
class RocCurve:
    thresholds: np.ndarray
    false_positive_rate: np.ndarray
    true_positive_rate: np.ndarray
    auroc: float


def label_hash(labels: Sequence[str]) -> int:
    """First 8 bytes of SHA-256 over the sorted labels, as an unsigned integer."""
    digest = hashlib.sha256("\x1f".join(sorted(labels)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def direction_seed(master_seed: int, cause: str, effect: str) -> np.random.SeedSequence:
    """Seed stream of one direction, independent of evaluation order."""
    flag = 0 if (cause, effect) == tuple(sorted((cause, effect))) else 1
    return np.random.SeedSequence([master_seed, label_hash((cause, effect)), flag])


def embed_series(series: ScalarSeries, cfg: DetectionConfig) -> EmbeddedSeries:
    """Delay-embed with the configured override, or select (d, tau) automatically."""
    override = cfg.embedding_for(series.label)
    if override is not None:
        params = EmbeddingParams(dimension=override.dimension, lag=override.lag)
        logger.info(f"[EMBED] {series.label}: using d={params.dimension}, lag={params.lag}")
    else:
        params, _, _ = select_embedding(
            series,
            max_lag=cfg.max_lag,
            max_dim=cfg.max_dim,
            bins=cfg.mi_bins,
            rtol=cfg.fnn_rtol,
            atol=cfg.fnn_atol,
        )
    return delay_embed(series, params)


def _neighborhood_for(emb_cause: EmbeddedSeries, emb_effect: EmbeddedSeries, cfg: DetectionConfig) -> NeighborhoodSpec:
    theiler = cfg.theiler if cfg.theiler is not None else default_theiler_window(emb_effect.params)
    if cfg.dd_condition is not None:
        dd = cfg.dd_condition
    else:
        dd = emb_cause.params.dimension == 1 and emb_effect.params.dimension == 1
    return NeighborhoodSpec(theiler_window=theiler, dd_condition=dd)


def _detect_direction(emb_cause: EmbeddedSeries, emb_effect: EmbeddedSeries, cfg: DetectionConfig,
                      threads: int) -> CausalityResult:
    spec = _neighborhood_for(emb_cause, emb_effect, cfg)
    grid = grid_for(emb_effect, cfg.e, cfg.n_eps)
    shells = build_shell_table(emb_effect, grid)
    curve = delta_profile(emb_effect, emb_cause, grid, spec, threads=threads, shells=shells)
    fit = estimate_slope(curve)
    pvalue = surrogate_p_value(
        emb_effect, emb_cause, grid, spec, cfg.surrogates,
        seed_sequence=direction_seed(cfg.surrogates.master_seed, emb_cause.label, emb_effect.label),
        threads=threads,
        original_slope=fit.slope,
        shells=shells,
    )
    return CausalityResult(
        cause=emb_cause.label,
        effect=emb_effect.label,
        slope=fit.slope,
        p_value=pvalue.p_value,
        significant=pvalue.p_value < cfg.alpha,
        curve=curve,
        fit=fit,
        pvalue=pvalue,
        cause_embedding=emb_cause.params,
        effect_embedding=emb_effect.params,
        theiler_window=spec.theiler_window,
        dd_condition=spec.dd_condition,
    )


def _detect_embedded(emb_a: EmbeddedSeries, emb_b: EmbeddedSeries, cfg: DetectionConfig,
                     threads: int) -> Tuple[CausalityResult, CausalityResult]:
    emb_a, emb_b = truncate_common((emb_a, emb_b))
    a_to_b = b_to_a = None
    try:
        a_to_b = _detect_direction(emb_a, emb_b, cfg, threads)
        b_to_a = _detect_direction(emb_b, emb_a, cfg, threads)
    except ContinuityScalingError as e:
        cause, effect = (emb_a.label, emb_b.label) if a_to_b is None else (emb_b.label, emb_a.label)
        raise PairError(cause, effect, e) from e
    return a_to_b, b_to_a


def detect_pair(a: ScalarSeries, b: ScalarSeries, cfg: DetectionConfig) -> Tuple[CausalityResult, CausalityResult]:
    """
    Test both directions between two series.

    Args:
        a: First series
        b: Second series
        cfg: Detection configuration

    Returns:
        (result a -> b, result b -> a)
    """
    start = time.time()
    try:
        emb_a = embed_series(a, cfg)
        emb_b = embed_series(b, cfg)
    except ContinuityScalingError as e:
        raise PairError(a.label, b.label, e) from e

    a_to_b, b_to_a = _detect_embedded(emb_a, emb_b, cfg, cfg.threads)
    logger.info(f"[DETECT] {a.label} <-> {b.label} done in {time.time() - start:.2f}s")
    return a_to_b, b_to_a


def infer_network(table: Sequence[ScalarSeries], cfg: DetectionConfig) -> CausalNetwork:
    """
    Run pairwise detection over every unordered pair of a series table.

    Every series is embedded once. Pairs are independent and are spread
    over cfg.threads workers; results are keyed by direction, so the
    network does not depend on completion order.

    Args:
        table: At least two series of equal length with distinct labels
        cfg: Detection configuration

    Returns:
        CausalNetwork with N * (N - 1) entries across results and errors
    """
    if len(table) < 2:
        raise InputSizeError(f"a network needs at least 2 series, got {len(table)}")
    lengths = {len(s) for s in table}
    if len(lengths) != 1:
        raise InputSizeError(f"all series must have the same length, got {sorted(lengths)}")
    labels = tuple(s.label for s in table)
    if len(set(labels)) != len(labels):
        raise ValueError(f"series labels must be unique: {labels}")

    logger.info("=" * 60)
    logger.info(f"[NETWORK] {len(labels)} series, {len(labels) * (len(labels) - 1)} directions")
    logger.info("=" * 60)
    start = time.time()

    embedded: Dict[str, EmbeddedSeries] = {}
    failed: Dict[str, str] = {}
    for series in table:
        try:
            embedded[series.label] = embed_series(series, cfg)
        except ContinuityScalingError as e:
            failed[series.label] = f"{type(e).__name__}: {e}"
            logger.error(f"[NETWORK] embedding {series.label} failed: {e}")

    results: Dict[Edge, CausalityResult] = {}
    errors: Dict[Edge, str] = {}
    pairs: List[Tuple[str, str]] = []
    for a, b in itertools.combinations(labels, 2):
        broken = [label for label in (a, b) if label in failed]
        if broken:
            message = "; ".join(f"{label}: {failed[label]}" for label in broken)
            errors[(a, b)] = message
            errors[(b, a)] = message
        else:
            pairs.append((a, b))

    def run(pair: Tuple[str, str]):
        a, b = pair
        try:
            return pair, _detect_embedded(embedded[a], embedded[b], cfg, threads=1), None
        except PairError as e:
            return pair, None, str(e)

    if cfg.threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
            outcomes = list(executor.map(run, pairs))
    else:
        outcomes = [run(pair) for pair in pairs]

    for (a, b), pair_results, message in outcomes:
        if pair_results is None:
            logger.error(f"[NETWORK] pair {a}, {b} failed: {message}")
            errors[(a, b)] = message
            errors[(b, a)] = message
            continue
        for result in pair_results:
            results[result.direction] = result

    logger.info(
        f"[NETWORK] done in {time.time() - start:.1f}s: {len(results)} directions, {len(errors)} errors"
    )
    return CausalNetwork(labels=labels, results=results, errors=errors)


def roc_auroc(scores: Mapping[Edge, float], truth: Set[Edge]) -> RocCurve:
    """
    ROC of ranking ordered pairs by score against a set of true links.

    Ties between scores produce diagonal segments, so the area equals the
    Mann-Whitney statistic.

    Args:
        scores: Score per ordered pair (higher means more likely causal)
        truth: True ordered pairs; pairs without a score are ignored

    Returns:
        RocCurve from (0, 0) to (1, 1)
    """
    edges = sorted(scores)
    y_true = np.array([edge in truth for edge in edges], dtype=int)
    if y_true.size == 0 or y_true.all() or not y_true.any():
        raise UndefinedRocError(
            f"ROC needs both true and false pairs among the scored ones "
            f"({int(y_true.sum())} true of {y_true.size})"
        )
    y_score = np.array([scores[edge] for edge in edges], dtype=np.float64)
    fpr, tpr, thresholds = roc_curve(y_true, y_score, drop_intermediate=False)
    return RocCurve(
        thresholds=thresholds,
        false_positive_rate=fpr,
        true_positive_rate=tpr,
        auroc=float(auc(fpr, tpr)),
    )
