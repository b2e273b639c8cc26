"""Shared fixtures and brute-force references for the test suite."""

import math

import numpy as np
import pytest

from core.embedding import EmbeddedSeries, EmbeddingParams, ScalarSeries
from core.generators import generate_logistic_network, logistic_pair_spec


def make_embedded(points, label="u"):
    """EmbeddedSeries straight from an array of points."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    params = EmbeddingParams(dimension=points.shape[1], lag=1)
    return EmbeddedSeries(points=points, params=params, source_length=points.shape[0] + params.window, label=label)


def point_distance(a, b):
    """Euclidean distance in plain floats, components summed in index order."""
    acc = None
    for x, y in zip(a, b):
        diff = float(x) - float(y)
        square = diff * diff
        acc = square if acc is None else acc + square
    return math.sqrt(acc)


def brute_force_neighbors(u, t, eps, theiler, dd):
    """Exhaustive neighbour set of u(t + 1) over tau in [1, T0 - 1]."""
    taus = []
    for tau in range(1, len(u)):
        if abs(t + 1 - tau) <= theiler:
            continue
        distance = point_distance(u[t + 1], u[tau])
        if dd:
            distance = max(distance, point_distance(u[t], u[tau - 1]))
        if distance < eps:
            taus.append(tau)
    return taus


def brute_force_profile(u, v, radii, theiler, dd):
    """
    Exhaustive <delta> curve: for each t and radius, neighbours in ascending tau.

    Returns (deltas, included row count, populated counts, neighbour pair counts).
    """
    u = [tuple(float(c) for c in row) for row in np.asarray(u)]
    v = [tuple(float(c) for c in row) for row in np.asarray(v)]
    radii = [float(r) for r in radii]
    n = len(radii)
    t0 = len(u)

    rows, included = [], []
    populated = [0] * n
    pair_counts = [0] * n
    for t in range(t0 - 1):
        sums, counts = [0.0] * n, [0] * n
        for tau in range(1, t0):
            if abs(t + 1 - tau) <= theiler:
                continue
            distance = point_distance(u[t + 1], u[tau])
            if dd:
                distance = max(distance, point_distance(u[t], u[tau - 1]))
            spread = point_distance(v[t], v[tau - 1])
            for j, eps in enumerate(radii):
                if distance < eps:
                    sums[j] += spread
                    counts[j] += 1

        row = [sums[j] / counts[j] if counts[j] else None for j in range(n)]
        filled = next((row[j] for j in range(n) if row[j] is not None), 0.0)
        row = [filled if value is None else value for value in row]
        for j in range(n):
            populated[j] += counts[j] > 0
        if counts[-1] > 0:
            for j in range(n):
                pair_counts[j] += counts[j]
        rows.append(row)
        included.append(counts[-1] > 0)

    total = [0.0] * n
    kept = 0
    for row, keep in zip(rows, included):
        if keep:
            total = [a + b for a, b in zip(total, row)]
            kept += 1
    return [value / kept for value in total], kept, populated, pair_counts


def logistic_orbit(length=400, r=3.8, x0=0.4, label="x"):
    values = [x0]
    for _ in range(length - 1):
        values.append(r * values[-1] * (1.0 - values[-1]))
    return ScalarSeries(values=np.array(values), label=label)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def logistic_pair():
    """Short unidirectionally coupled pair x1 -> x2 (mu21 = 0.3)."""
    spec = logistic_pair_spec(mu21=0.3, length=600, transient=200)
    return generate_logistic_network(spec)


@pytest.fixture
def dyadic_points(rng):
    """Points on a 1/64 lattice, so shifts by integers are exact."""
    def build(n, d):
        return rng.integers(0, 256, size=(n, d)).astype(np.float64) / 64.0
    return build
