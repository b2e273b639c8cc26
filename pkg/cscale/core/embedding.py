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
Delay-coordinate embedding of scalar time series
Lag selection by delayed mutual information, dimension selection by false nearest neighbours
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import mutual_info_score
from sklearn.neighbors import NearestNeighbors

from core.errors import InputSizeError, NonFiniteError

logger = logging.getLogger(__name__)

# FNN acceptance threshold (fraction of false neighbours)
FNN_THRESHOLD = 0.01

# Permutations used to estimate the MI estimator floor
MI_FLOOR_PERMUTATIONS = 5
MI_FLOOR_SEED = 0


def _readonly(values: np.ndarray) -> np.ndarray:
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class ScalarSeries:
    """One observed scalar series (a map orbit or a sampled flow observable)."""

    values: np.ndarray
    label: str = "x"
    sample_interval: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size < 2:
            raise InputSizeError(f"series {self.label!r} needs at least 2 samples, got {values.size}")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NonFiniteError(
                f"series {self.label!r} has {bad.size} non-finite samples (first at index {bad[0]})"
            )
        if not self.sample_interval > 0:
            raise ValueError(f"sample_interval must be positive, got {self.sample_interval}")
        object.__setattr__(self, "values", _readonly(values))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class EmbeddingParams:
    """Delay-embedding dimension and lag (lag in samples)."""

    dimension: int
    lag: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"embedding dimension must be >= 1, got {self.dimension}")
        if self.lag < 1:
            raise ValueError(f"embedding lag must be >= 1, got {self.lag}")

    @property
    def window(self) -> int:
        """Samples spanned by one delay vector minus one: (d - 1) * tau."""
        return (self.dimension - 1) * self.lag


@dataclass(frozen=True, eq=False)
class EmbeddedSeries:
    """Delay vectors reconstructed from one scalar series, shape (T0, d)."""

    points: np.ndarray
    params: EmbeddingParams
    source_length: int
    label: str = "x"

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[1] != self.params.dimension:
            raise ValueError(
                f"points must have shape (T0, {self.params.dimension}), got {points.shape}"
            )
        if points.shape[0] < 2:
            raise InputSizeError(f"embedded series {self.label!r} needs at least 2 points")
        object.__setattr__(self, "points", _readonly(points))

    def __len__(self) -> int:
        return self.points.shape[0]

    def with_points(self, points: np.ndarray) -> "EmbeddedSeries":
        """Same metadata, new point sequence (used by truncation and surrogates)."""
        return EmbeddedSeries(points=points, params=self.params,
                              source_length=self.source_length, label=self.label)


@dataclass(frozen=True, eq=False)
class LagSelection:
    """Outcome of delayed-mutual-information lag selection."""

    lag: int
    is_local_minimum: bool
    mi_profile: np.ndarray = field(repr=False)  # index k holds MI at lag k + 1
    noise_floor: float = 0.0
    bins: int = 0


@dataclass(frozen=True, eq=False)
class DimensionSelection:
    """Outcome of false-nearest-neighbour dimension selection."""

    dimension: int
    converged: bool
    fnn_fractions: np.ndarray = field(repr=False)  # index k holds the fraction at d = k + 1


def default_mi_bins(length: int) -> int:
    """Equal-count bin number floor(sqrt(T / 5)), never below 2."""
    return max(2, int(math.isqrt(length // 5)))


def _rank_labels(values: np.ndarray, bins: int) -> np.ndarray:
    """Equal-count bin labels from ranks; identical for any increasing transform."""
    ranks = np.argsort(np.argsort(values, kind="stable"), kind="stable")
    return (ranks * bins) // values.size


def mutual_information_profile(series: ScalarSeries, max_lag: int, bins: Optional[int] = None) -> np.ndarray:
    """
    Delayed mutual information I(z_t; z_{t+l}) for l = 1..max_lag.

    Args:
        series: Input series
        max_lag: Largest lag evaluated (must be below half the length)
        bins: Equal-count bins per axis (default floor(sqrt(T/5)))

    Returns:
        Array of length max_lag, natural-log units
    """
    n = len(series)
    if max_lag < 1:
        raise ValueError(f"max_lag must be >= 1, got {max_lag}")
    if max_lag >= n / 2:
        raise InputSizeError(f"series {series.label!r} of length {n} too short for max_lag={max_lag}")
    bins = bins or default_mi_bins(n)
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")

    labels = _rank_labels(series.values, bins)
    return np.array([mutual_info_score(labels[:-lag], labels[lag:]) for lag in range(1, max_lag + 1)])


def _mi_noise_floor(labels: np.ndarray) -> float:
    """MI between the series and shuffled copies of itself: mean + 3 std."""
    rng = np.random.default_rng(MI_FLOOR_SEED)
    samples = []
    for _ in range(MI_FLOOR_PERMUTATIONS):
        shuffled = rng.permutation(labels)
        samples.append(mutual_info_score(labels[:-1], shuffled[1:]))
    return float(np.mean(samples) + 3.0 * np.std(samples))


def select_lag_mutual_information(series: ScalarSeries, max_lag: int = 20,
                                  bins: Optional[int] = None) -> LagSelection:
    """
    Pick the embedding lag from the delayed mutual information profile.

    Returns the smallest lag that is a local minimum of the profile or whose
    MI has already dropped to the estimator floor. Without either, the global
    minimum is returned with `is_local_minimum=False`.

    Args:
        series: Input series
        max_lag: Largest candidate lag
        bins: Equal-count bins per axis (default floor(sqrt(T/5)))

    Returns:
        LagSelection with the chosen lag and the MI profile
    """
    n = len(series)
    bins = bins or default_mi_bins(n)
    # one extra lag so max_lag itself can be tested as a local minimum
    extended = max_lag + 1 if max_lag + 1 < n / 2 else max_lag
    profile = mutual_information_profile(series, extended, bins)
    floor = _mi_noise_floor(_rank_labels(series.values, bins))

    for lag in range(1, max_lag + 1):
        mi = profile[lag - 1]
        below_previous = lag == 1 or mi < profile[lag - 2]
        not_above_next = lag >= extended or mi <= profile[lag]
        if (below_previous and not_above_next) or mi <= floor:
            logger.debug(f"[EMBED] {series.label}: lag {lag} selected (MI={mi:.4f}, floor={floor:.4f})")
            return LagSelection(lag=lag, is_local_minimum=True, mi_profile=profile[:max_lag],
                                noise_floor=floor, bins=bins)

    lag = int(np.argmin(profile[:max_lag])) + 1
    logger.warning(f"[EMBED] {series.label}: no MI local minimum up to lag {max_lag}, using global minimum {lag}")
    return LagSelection(lag=lag, is_local_minimum=False, mi_profile=profile[:max_lag],
                        noise_floor=floor, bins=bins)


def _delay_matrix(values: np.ndarray, dimension: int, lag: int, n_points: int) -> np.ndarray:
    return np.stack([values[k * lag:k * lag + n_points] for k in range(dimension)], axis=1)


def fnn_fraction(series: ScalarSeries, dimension: int, lag: int,
                 rtol: float = 10.0, atol: float = 2.0) -> float:
    """
    Fraction of false nearest neighbours when going from d to d + 1.

    Args:
        series: Input series
        dimension: Embedding dimension d under test
        lag: Embedding lag in samples
        rtol: Relative distance-increase threshold
        atol: Threshold on the (d+1)-distance relative to the series spread

    Returns:
        Fraction in [0, 1]
    """
    values = series.values
    n_points = values.size - dimension * lag
    if n_points < 3:
        raise InputSizeError(
            f"series {series.label!r} of length {values.size} too short for d={dimension}, lag={lag}"
        )

    points = _delay_matrix(values, dimension, lag, n_points)
    next_coord = values[dimension * lag:dimension * lag + n_points]

    neighbours = NearestNeighbors(n_neighbors=1).fit(points)
    distances, indices = neighbours.kneighbors()
    r_d = distances[:, 0]
    gap = np.abs(next_coord - next_coord[indices[:, 0]])

    spread = np.std(values)
    too_far_relative = gap > rtol * r_d
    too_far_absolute = np.sqrt(r_d ** 2 + gap ** 2) > atol * spread
    return float(np.mean(too_far_relative | too_far_absolute))


def select_dimension_fnn(series: ScalarSeries, lag: int, max_dim: int = 10,
                         rtol: float = 10.0, atol: float = 2.0) -> DimensionSelection:
    """
    Smallest embedding dimension whose FNN fraction is below 1%.

    Args:
        series: Input series
        lag: Embedding lag in samples
        max_dim: Largest candidate dimension (fallback when never converged)
        rtol: Kennel relative tolerance
        atol: Kennel absolute tolerance

    Returns:
        DimensionSelection with the chosen dimension and the scanned fractions
    """
    if max_dim < 2:
        raise ValueError(f"max_dim must be >= 2, got {max_dim}")
    if lag < 1:
        raise ValueError(f"lag must be >= 1, got {lag}")
    if len(series) - max_dim * lag < 3:
        raise InputSizeError(
            f"series {series.label!r} of length {len(series)} too short for max_dim={max_dim}, lag={lag}"
        )

    fractions = []
    for dimension in range(1, max_dim + 1):
        fraction = fnn_fraction(series, dimension, lag, rtol, atol)
        fractions.append(fraction)
        if fraction < FNN_THRESHOLD:
            logger.debug(f"[EMBED] {series.label}: dimension {dimension} selected (FNN={fraction:.4f})")
            return DimensionSelection(dimension=dimension, converged=True, fnn_fractions=np.array(fractions))

    logger.warning(
        f"[EMBED] {series.label}: FNN fraction never below {FNN_THRESHOLD:.0%} up to d={max_dim}, "
        f"falling back to {max_dim}"
    )
    return DimensionSelection(dimension=max_dim, converged=False, fnn_fractions=np.array(fractions))


def delay_embed(series: ScalarSeries, params: EmbeddingParams) -> EmbeddedSeries:
    """
    Build delay vectors z(t) = (z_t, z_{t+tau}, ..., z_{t+(d-1)tau}).

    Args:
        series: Input series of length T
        params: Dimension and lag

    Returns:
        EmbeddedSeries with T0 = T - (d - 1) * tau points
    """
    n_points = len(series) - params.window
    if n_points < 2:
        raise InputSizeError(
            f"series {series.label!r} of length {len(series)} too short for "
            f"d={params.dimension}, lag={params.lag}"
        )
    points = _delay_matrix(series.values, params.dimension, params.lag, n_points)
    return EmbeddedSeries(points=points, params=params, source_length=len(series), label=series.label)


def select_embedding(series: ScalarSeries, max_lag: int = 20, max_dim: int = 10,
                     bins: Optional[int] = None, rtol: float = 10.0,
                     atol: float = 2.0) -> Tuple[EmbeddingParams, LagSelection, DimensionSelection]:
    """Automatic (d, tau): MI lag first, then FNN dimension at that lag."""
    max_lag = min(max_lag, (len(series) - 1) // 2)
    lag_selection = select_lag_mutual_information(series, max_lag=max_lag, bins=bins)
    dim_selection = select_dimension_fnn(series, lag_selection.lag, max_dim=max_dim, rtol=rtol, atol=atol)
    params = EmbeddingParams(dimension=dim_selection.dimension, lag=lag_selection.lag)
    logger.info(f"[EMBED] {series.label}: auto-selected d={params.dimension}, lag={params.lag}")
    return params, lag_selection, dim_selection


def truncate_common(embedded: Sequence[EmbeddedSeries]) -> Tuple[EmbeddedSeries, ...]:
    """Cut every embedded series to the shortest T0 (keeping the first points)."""
    t0 = min(len(e) for e in embedded)
    return tuple(e if len(e) == t0 else e.with_points(e.points[:t0]) for e in embedded)
