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
Segment-shuffle surrogate test for continuity-scaling slopes
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import norm

from config.detection_config import SurrogateConfig
from core.embedding import EmbeddedSeries
from core.errors import InputSizeError
from core.scaling import EpsilonGrid, NeighborhoodSpec, ShellTable, build_shell_table, delta_profile, estimate_slope

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


@dataclass(frozen=True, eq=False)
class PValueResult:
    """Original slope against its surrogate distribution."""

    original_slope: float
    surrogate_slopes: np.ndarray = field(repr=False)
    mean: float = 0.0
    std: float = 0.0
    p_value: float = 0.5

    @property
    def z_score(self) -> Optional[float]:
        if self.std == 0.0:
            return None
        return (self.original_slope - self.mean) / self.std


def segment_order(t0: int, n_segments: int, seed: SeedLike) -> np.ndarray:
    """
    Index order of a block shuffle of T0 points.

    Block length is ceil(T0 / n_segments); the last block may be shorter.

    Args:
        t0: Number of points
        n_segments: Requested number of segments (<= T0)
        seed: Seed, SeedSequence or Generator driving the permutation

    Returns:
        Permutation of range(T0) that keeps each block contiguous
    """
    if n_segments < 1:
        raise ValueError(f"n_segments must be >= 1, got {n_segments}")
    if n_segments > t0:
        raise InputSizeError(f"cannot cut {t0} points into {n_segments} segments")

    length = math.ceil(t0 / n_segments)
    starts = range(0, t0, length)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(starts))
    return np.concatenate([np.arange(starts[k], min(starts[k] + length, t0)) for k in order])


def segment_shuffle(emb: EmbeddedSeries, n_segments: int, seed: SeedLike) -> EmbeddedSeries:
    """Cut the point sequence into consecutive blocks and permute the blocks."""
    try:
        index = segment_order(len(emb), n_segments, seed)
    except InputSizeError as e:
        raise InputSizeError(f"{emb.label!r}: {e}") from e
    return emb.with_points(emb.points[index])


def normal_cdf(x: float) -> float:
    """Standard normal cumulative distribution function."""
    return float(norm.cdf(x))


def gaussian_p_value(original: float, mean: float, std: float) -> float:
    """One-sided p = 1 - Phi((s - mean) / std); 0.5 when std is zero."""
    if std == 0.0:
        return 0.5
    return min(1.0, max(0.0, 1.0 - normal_cdf((original - mean) / std)))


def summarize_slopes(original: float, surrogate_slopes: Sequence[float]) -> PValueResult:
    """Mean and population std over the original plus surrogate slopes, and the p-value."""
    surrogates = np.asarray(surrogate_slopes, dtype=np.float64)
    pooled = np.concatenate([[original], surrogates])
    mean = float(np.mean(pooled))
    std = float(np.std(pooled))
    return PValueResult(
        original_slope=float(original),
        surrogate_slopes=surrogates,
        mean=mean,
        std=std,
        p_value=gaussian_p_value(original, mean, std),
    )


def replicate_seeds(base: np.random.SeedSequence, replicate: int):
    """Independent (u, v) seed streams for one replicate, fixed by position."""
    key = tuple(base.spawn_key) + (replicate,)
    return (
        np.random.SeedSequence(base.entropy, spawn_key=key + (0,)),
        np.random.SeedSequence(base.entropy, spawn_key=key + (1,)),
    )


def surrogate_p_value(emb_u: EmbeddedSeries, emb_v: EmbeddedSeries, grid: EpsilonGrid,
                      spec: NeighborhoodSpec, cfg: SurrogateConfig,
                      seed_sequence: Optional[np.random.SeedSequence] = None,
                      threads: int = 1, original_slope: Optional[float] = None,
                      shells: Optional[ShellTable] = None) -> PValueResult:
    """
    Significance of the slope of v on u against segment-shuffled surrogates.

    Both series are shuffled with independent permutations in every
    replicate; the grid and the effect-side shells are reused because
    shuffling keeps the point set.

    Args:
        emb_u: Effect-side embedded series
        emb_v: Cause-side embedded series (same T0)
        grid: Radius grid of emb_u
        spec: Neighbourhood settings
        cfg: Segments, replicates and master seed
        seed_sequence: Base seed stream (default: SeedSequence(cfg.master_seed))
        threads: Worker threads over replicates (result does not depend on it)
        original_slope: Slope of the unshuffled pair if already known
        shells: Shell table of emb_u on this grid (built here if None)

    Returns:
        PValueResult
    """
    base = seed_sequence if seed_sequence is not None else np.random.SeedSequence(cfg.master_seed)
    start = time.time()
    t0 = len(emb_u)
    if shells is None:
        shells = build_shell_table(emb_u, grid)

    if original_slope is None:
        original_slope = estimate_slope(delta_profile(emb_u, emb_v, grid, spec, shells=shells)).slope

    def replicate(q: int) -> float:
        seed_u, seed_v = replicate_seeds(base, q)
        order_u = segment_order(t0, cfg.n_segments, seed_u)
        order_v = segment_order(t0, cfg.n_segments, seed_v)
        shuffled_u = emb_u.with_points(emb_u.points[order_u])
        shuffled_v = emb_v.with_points(emb_v.points[order_v])
        table = shells.reordered(order_u) if shells is not None else None
        slope = estimate_slope(delta_profile(shuffled_u, shuffled_v, grid, spec, shells=table)).slope
        logger.debug(f"[SURROGATE] {emb_v.label}->{emb_u.label} replicate {q}: slope={slope:.6f}")
        return slope

    replicates = range(cfg.n_replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            slopes = list(executor.map(replicate, replicates))
    else:
        slopes = [replicate(q) for q in replicates]

    result = summarize_slopes(original_slope, slopes)
    logger.info(
        f"[SURROGATE] {emb_v.label}->{emb_u.label}: s={result.original_slope:.6f}, "
        f"mu={result.mean:.6f}, sigma={result.std:.6f}, p={result.p_value:.4g} "
        f"({cfg.n_replicates} replicates in {time.time() - start:.2f}s)"
    )
    return result
