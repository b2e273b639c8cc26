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
Continuity-scaling curve and slope estimation

For an effect series u and a candidate cause v (both delay-embedded), the
curve pairs ln(eps) with the mean v-distance <delta>(eps) between v(t) and
v(tau - 1) over the neighbours tau of u(t + 1) that lie within eps. Its
slope over the scaling range is the causal index of v on u.

Summation order is fixed so that any blocking or thread count gives
bit-identical curves:
  - for each t and each radius eps_j, the v-distances of the neighbours
    are added one at a time in ascending tau
  - the time average adds rows in ascending t
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from core.embedding import EmbeddedSeries, EmbeddingParams
from core.errors import DegenerateDataError, DegenerateGeometryError, InputSizeError

logger = logging.getLogger(__name__)

# Rows of t processed per distance block
DEFAULT_BLOCK_SIZE = 128

# Largest T0 whose pair shells are kept in memory (T0^2 bytes)
SHELL_TABLE_MAX_POINTS = 12000


@dataclass(frozen=True, eq=False)
class EpsilonGrid:
    """Geometric radius grid eps_1 = e * D < ... < eps_N = D."""

    values: np.ndarray
    shrink_factor: float

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return self.values.size

    @property
    def log_values(self) -> np.ndarray:
        return np.log(self.values)

    def scaled(self, factor: float) -> "EpsilonGrid":
        return EpsilonGrid(values=self.values * factor, shrink_factor=self.shrink_factor)


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Theiler exclusion window E and the optional predecessor condition."""

    theiler_window: int = 0
    dd_condition: bool = False

    def __post_init__(self):
        if self.theiler_window < 0:
            raise ValueError(f"theiler_window must be >= 0, got {self.theiler_window}")


@dataclass(frozen=True, eq=False)
class ScalingCurve:
    """<delta>_j against eps_j, plus how well populated each radius was."""

    grid: EpsilonGrid
    deltas: np.ndarray
    populated: np.ndarray          # time indices with a non-empty neighbourhood at eps_j
    neighbor_pairs: np.ndarray     # total neighbours at eps_j over the averaged time indices
    n_included: int                # time indices entering the average
    n_times: int                   # candidate time indices (T0 - 1)

    @property
    def log_eps(self) -> np.ndarray:
        return self.grid.log_values


@dataclass(frozen=True, eq=False)
class SlopeEstimate:
    """Least-squares slope over the steepest part of the curve."""

    slope: float
    intercept: float
    fit_indices: Tuple[int, ...]
    residual_rms: float
    successive_slopes: np.ndarray = field(repr=False)


def default_theiler_window(params: EmbeddingParams) -> int:
    """One embedding window: (d - 1) * tau + 1."""
    return params.window + 1


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Euclidean distances between rows of `a` and rows of `b`.

    Components are accumulated in index order so a single pair computed in
    plain Python floats gives the same bits.
    """
    acc = None
    for k in range(a.shape[1]):
        diff = a[:, None, k] - b[None, :, k]
        square = diff * diff
        acc = square if acc is None else acc + square
    return np.sqrt(acc)


def diameter(emb: EmbeddedSeries, block_size: int = 512) -> float:
    """
    Largest pairwise distance between embedded points.

    Args:
        emb: Embedded series with at least 2 points
        block_size: Rows compared per block

    Returns:
        Diameter D (0 for a constant series)
    """
    points = emb.points
    if points.shape[0] < 2:
        raise InputSizeError(f"diameter of {emb.label!r} needs at least 2 points")
    largest = 0.0
    for start in range(0, points.shape[0], block_size):
        block = pairwise_distances(points[start:start + block_size], points)
        largest = max(largest, float(block.max()))
    return largest


def build_epsilon_grid(diameter: float, e: float = 0.001, n_eps: int = 33) -> EpsilonGrid:
    """
    Geometric radius grid from e * D to D with equally spaced logarithms.

    Args:
        diameter: Diameter D of the effect-side embedding
        e: Shrink factor in (0, 1)
        n_eps: Number of radii (>= 2)

    Returns:
        EpsilonGrid with exact endpoints
    """
    if not 0.0 < e < 1.0:
        raise ValueError(f"shrink factor e must lie in (0, 1), got {e}")
    if n_eps < 2:
        raise InputSizeError(f"n_eps must be >= 2, got {n_eps}")
    if not diameter > 0.0:
        raise DegenerateGeometryError(f"diameter must be positive (constant series?), got {diameter}")

    values = np.exp(np.linspace(np.log(e * diameter), np.log(diameter), n_eps))
    values[0] = e * diameter
    values[-1] = diameter
    return EpsilonGrid(values=values, shrink_factor=e)


def neighbor_index_set(emb_u: EmbeddedSeries, t: int, eps: float, spec: NeighborhoodSpec) -> np.ndarray:
    """
    Time indices tau whose state u(tau) lies within eps of u(t + 1).

    Indices are 0-based: t in [0, T0 - 2] and tau in [1, T0 - 1] (so that
    tau - 1 exists). Indices with |t + 1 - tau| <= E are excluded; with the
    predecessor condition u(tau - 1) must also lie within eps of u(t).

    Args:
        emb_u: Effect-side embedded series
        t: Reference time index
        eps: Radius (> 0)
        spec: Theiler window and predecessor switch

    Returns:
        Sorted array of tau (possibly empty)
    """
    points = emb_u.points
    t0 = points.shape[0]
    if not 0 <= t <= t0 - 2:
        raise ValueError(f"t must lie in [0, {t0 - 2}], got {t}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")

    taus = np.arange(1, t0)
    distance = pairwise_distances(points[t + 1:t + 2], points[1:])[0]
    if spec.dd_condition:
        distance = np.maximum(distance, pairwise_distances(points[t:t + 1], points[:-1])[0])
    keep = (distance < eps) & (np.abs(t + 1 - taus) > spec.theiler_window)
    return taus[keep]


@dataclass(frozen=True, eq=False)
class ShellTable:
    """
    Shell of every pair of effect-side points on one radius grid.

    The shell of a pair is the number of radii <= their distance, so the pair
    are neighbours at eps_j exactly when shell <= j. Row i of the series being
    profiled is row order[i] of the matrix; a segment shuffle of the same
    points only changes the order.
    """

    matrix: np.ndarray
    order: np.ndarray

    def reordered(self, permutation: np.ndarray) -> "ShellTable":
        return ShellTable(matrix=self.matrix, order=self.order[permutation])

    def lookup(self, rows: np.ndarray, columns: np.ndarray) -> np.ndarray:
        return self.matrix[np.ix_(self.order[rows], self.order[columns])]


def build_shell_table(emb_u: EmbeddedSeries, grid: EpsilonGrid,
                      block_size: int = DEFAULT_BLOCK_SIZE) -> Optional[ShellTable]:
    """
    Shell table of an effect-side embedding, or None above SHELL_TABLE_MAX_POINTS.

    Args:
        emb_u: Effect-side embedded series
        grid: Radius grid the shells refer to
        block_size: Rows computed per block

    Returns:
        ShellTable in the series' own order
    """
    points = emb_u.points
    n = points.shape[0]
    if n > SHELL_TABLE_MAX_POINTS:
        logger.debug(f"[SCALING] {emb_u.label}: T0={n} above shell table limit, computing shells per block")
        return None
    radii = grid.values
    matrix = np.empty((n, n), dtype=np.min_scalar_type(radii.size))
    for start in range(0, n, block_size):
        block = pairwise_distances(points[start:start + block_size], points)
        matrix[start:start + block_size] = np.searchsorted(radii, block, side="right")
    return ShellTable(matrix=matrix, order=np.arange(n))


def _block_shells(u: np.ndarray, radii: np.ndarray, spec: NeighborhoodSpec, rows: np.ndarray,
                  table: Optional[ShellTable]) -> np.ndarray:
    """Shells of (u(t + 1), u(tau)) for a block of t; Theiler-excluded pairs get shell N."""
    n_eps = radii.size
    n_tau = u.shape[0] - 1
    taus = np.arange(1, n_tau + 1)

    if table is not None:
        shells = table.lookup(rows + 1, taus).astype(np.int64)
        if spec.dd_condition:
            shells = np.maximum(shells, table.lookup(rows, taus - 1))
    else:
        distance = pairwise_distances(u[rows + 1], u[1:])
        if spec.dd_condition:
            distance = np.maximum(distance, pairwise_distances(u[rows], u[:-1]))
        shells = np.searchsorted(radii, distance, side="right")

    # column j holds tau = j + 1, so |t + 1 - tau| = |t - j|
    lag = np.abs(rows[:, None] - np.arange(n_tau)[None, :])
    shells[lag <= spec.theiler_window] = n_eps
    return shells


def _sequential_sums(shells: np.ndarray, v_distance: np.ndarray, n_eps: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-radius v-distance sums and neighbour counts, shape (B, N).

    Each sum adds the neighbours of one t one at a time in ascending tau.
    Columns with no neighbour in the block at the current radius are dropped
    as the radius shrinks; excluded entries add 0.0, which leaves a running
    sum of non-negative terms unchanged.
    """
    sums = np.zeros((shells.shape[0], n_eps), dtype=np.float64)
    counts = np.zeros((shells.shape[0], n_eps), dtype=np.int64)
    nearest = shells.min(axis=0)
    for j in range(n_eps - 1, -1, -1):
        columns = np.flatnonzero(nearest <= j)
        if columns.size == 0:
            break
        shells, v_distance, nearest = shells[:, columns], v_distance[:, columns], nearest[columns]
        inside = shells <= j
        sums[:, j] = np.cumsum(np.where(inside, v_distance, 0.0), axis=1)[:, -1]
        counts[:, j] = inside.sum(axis=1)
    return sums, counts


def _block_sums(u: np.ndarray, v: np.ndarray, radii: np.ndarray, spec: NeighborhoodSpec,
                rows: np.ndarray, table: Optional[ShellTable]) -> Tuple[np.ndarray, np.ndarray]:
    """v-distance sums and neighbour counts for a block of t, shape (B, N)."""
    shells = _block_shells(u, radii, spec, rows, table)
    v_distance = pairwise_distances(v[rows], v[:-1])
    return _sequential_sums(shells, v_distance, radii.size)


def _propagate_empty(sums: np.ndarray, counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-t delta values with empty radii copied from the next larger radius.

    Returns the (rows, N) delta matrix and a mask of rows that have a
    neighbour at the largest radius.
    """
    n_eps = counts.shape[1]
    nonempty = counts > 0
    included = nonempty[:, -1]
    delta = np.zeros(counts.shape, dtype=np.float64)
    np.divide(sums, counts, out=delta, where=nonempty)

    # neighbourhoods are nested, so the first non-empty radius feeds every smaller one
    first = np.where(nonempty.any(axis=1), nonempty.argmax(axis=1), n_eps - 1)
    fill = delta[np.arange(delta.shape[0]), first]
    delta = np.where(nonempty, delta, fill[:, None])
    return delta, included


def time_average(delta: np.ndarray, included: np.ndarray) -> np.ndarray:
    """Mean over included rows, accumulated in ascending t."""
    kept = delta[included]
    return np.cumsum(kept, axis=0)[-1] / kept.shape[0]


def delta_profile(emb_u: EmbeddedSeries, emb_v: EmbeddedSeries, grid: EpsilonGrid,
                  spec: NeighborhoodSpec, threads: int = 1,
                  block_size: int = DEFAULT_BLOCK_SIZE,
                  shells: Optional[ShellTable] = None) -> ScalingCurve:
    """
    Continuity-scaling curve of v (candidate cause) against u (effect).

    For each t and radius eps_j, delta^t is the mean distance between v(t)
    and v(tau - 1) over the neighbour set of u(t + 1). Empty sets take the
    value of the next larger radius; a t with no neighbour even at the
    largest radius is dropped from the average at every radius.

    Args:
        emb_u: Effect-side embedded series (eps side)
        emb_v: Cause-side embedded series (delta side), same T0 as emb_u
        grid: Radius grid built from the diameter of emb_u
        spec: Theiler window and predecessor switch
        threads: Worker threads over blocks of t (result does not depend on it)
        block_size: Rows of t per block
        shells: Shell table of emb_u's points on this grid (computed per block if None)

    Returns:
        ScalingCurve
    """
    u, v = emb_u.points, emb_v.points
    if u.shape[0] != v.shape[0]:
        raise ValueError(f"embedded series must share T0 ({u.shape[0]} != {v.shape[0]}); truncate first")
    t0 = u.shape[0]
    if t0 < 3:
        raise InputSizeError(f"need T0 >= 3 for a scaling curve, got {t0}")
    if shells is not None and shells.order.size != t0:
        raise ValueError(f"shell table covers {shells.order.size} points, series has {t0}")

    radii = grid.values
    n_rows = t0 - 1
    blocks: List[np.ndarray] = [np.arange(s, min(s + block_size, n_rows)) for s in range(0, n_rows, block_size)]

    def run(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _block_sums(u, v, radii, spec, rows, shells)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(run, blocks))
    else:
        parts = [run(rows) for rows in blocks]

    sums = np.concatenate([p[0] for p in parts], axis=0)
    counts = np.concatenate([p[1] for p in parts], axis=0)
    delta, included = _propagate_empty(sums, counts)

    n_included = int(included.sum())
    if n_included == 0:
        raise DegenerateDataError(
            f"no time index of {emb_u.label!r} has a neighbour at the largest radius "
            f"(T0={t0}, E={spec.theiler_window})"
        )

    curve = ScalingCurve(
        grid=grid,
        deltas=time_average(delta, included),
        populated=(counts > 0).sum(axis=0),
        neighbor_pairs=counts[included].sum(axis=0),
        n_included=n_included,
        n_times=n_rows,
    )
    logger.debug(
        f"[SCALING] {emb_v.label}->{emb_u.label}: T0={t0}, included {n_included}/{n_rows} time indices"
    )
    return curve


def estimate_slope(curve: ScalingCurve) -> SlopeEstimate:
    """
    Slope of <delta> against ln(eps) over the steepest half of the curve.

    Successive slopes S_j are ranked (ties prefer the smaller j); the
    floor((N + 1) / 2) largest select the index set H = {j, j + 1}, and a
    least-squares line is fitted to the points in H.

    Args:
        curve: Scaling curve with at least 3 points

    Returns:
        SlopeEstimate (slope 0 for a flat curve)
    """
    x_raw = np.asarray(curve.log_eps, dtype=np.float64)
    y_raw = np.asarray(curve.deltas, dtype=np.float64)
    n = x_raw.size
    if n < 3:
        raise InputSizeError(f"slope estimation needs at least 3 curve points, got {n}")

    order = np.argsort(x_raw, kind="stable")
    x, y = x_raw[order], y_raw[order]

    successive = np.diff(y) / np.diff(x)
    n_pick = min((n + 1) // 2, n - 1)
    picked = np.argsort(-successive, kind="stable")[:n_pick]
    fit_indices = np.union1d(picked, picked + 1)

    design = np.column_stack([x[fit_indices], np.ones(fit_indices.size)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y[fit_indices], rcond=None)
    residual = y[fit_indices] - (slope * x[fit_indices] + intercept)

    return SlopeEstimate(
        slope=float(slope),
        intercept=float(intercept),
        fit_indices=tuple(int(i) for i in fit_indices),
        residual_rms=float(np.sqrt(np.mean(residual ** 2))),
        successive_slopes=successive,
    )


def scaling_slope(emb_u: EmbeddedSeries, emb_v: EmbeddedSeries, grid: EpsilonGrid,
                  spec: NeighborhoodSpec, threads: int = 1) -> Tuple[ScalingCurve, SlopeEstimate]:
    """Curve and fitted slope in one call."""
    curve = delta_profile(emb_u, emb_v, grid, spec, threads=threads)
    return curve, estimate_slope(curve)


def grid_for(emb_u: EmbeddedSeries, e: float, n_eps: int, diameter_value: Optional[float] = None) -> EpsilonGrid:
    """Radius grid for an effect-side embedding (diameter computed if not given)."""
    return build_epsilon_grid(diameter(emb_u) if diameter_value is None else diameter_value, e, n_eps)
