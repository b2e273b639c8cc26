"""Tests for the continuity-scaling curve and slope estimation."""

import math

import numpy as np
import pytest

from core.errors import DegenerateGeometryError, InputSizeError
from core.scaling import (
    EpsilonGrid,
    NeighborhoodSpec,
    ScalingCurve,
    build_epsilon_grid,
    build_shell_table,
    delta_profile,
    diameter,
    estimate_slope,
    grid_for,
    neighbor_index_set,
)

from conftest import brute_force_neighbors, brute_force_profile, logistic_orbit, make_embedded


def _curve(log_eps, deltas):
    values = np.exp(np.asarray(log_eps, dtype=np.float64))
    n = values.size
    return ScalingCurve(
        grid=EpsilonGrid(values=values, shrink_factor=0.001),
        deltas=np.asarray(deltas, dtype=np.float64),
        populated=np.ones(n, dtype=int),
        neighbor_pairs=np.ones(n, dtype=int),
        n_included=1,
        n_times=1,
    )


def test_diameter_examples():
    assert diameter(make_embedded([0.0, 1.0])) == 1.0
    assert diameter(make_embedded(np.full((5, 2), 0.3))) == 0.0
    corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    assert diameter(make_embedded(corners)) == math.sqrt(2.0)


def test_diameter_matches_brute_force(rng):
    points = rng.normal(size=(90, 3))
    expected = max(np.linalg.norm(a - b) for a in points for b in points)
    assert diameter(make_embedded(points), block_size=16) == pytest.approx(expected, rel=1e-14)


def test_epsilon_grid_defaults():
    grid = build_epsilon_grid(1.0, e=0.001, n_eps=33)
    assert grid.count == 33
    assert grid.values[0] == 0.001
    assert grid.values[-1] == 1.0
    np.testing.assert_allclose(grid.values[1:] / grid.values[:-1], 1000 ** (1 / 32), rtol=1e-12)
    np.testing.assert_allclose(np.diff(grid.log_values), np.log(1000) / 32, rtol=1e-10)


def test_epsilon_grid_small_cases():
    np.testing.assert_allclose(build_epsilon_grid(2.0, e=0.5, n_eps=3).values, [1.0, math.sqrt(2.0), 2.0], rtol=1e-15)
    np.testing.assert_array_equal(build_epsilon_grid(4.0, e=0.25, n_eps=2).values, [1.0, 4.0])


def test_epsilon_grid_rejects_zero_diameter():
    with pytest.raises(DegenerateGeometryError):
        build_epsilon_grid(0.0)
    with pytest.raises(ValueError):
        build_epsilon_grid(1.0, e=1.5)


def test_neighbors_everything_within_large_radius(rng):
    emb = make_embedded(rng.normal(size=(12, 2)))
    t = 4
    taus = neighbor_index_set(emb, t, diameter(emb) * 2, NeighborhoodSpec(theiler_window=0))
    assert list(taus) == [tau for tau in range(1, 12) if tau != t + 1]


def test_neighbors_empty_below_minimum_distance():
    emb = make_embedded([0.0, 1.0, 3.0, 6.0, 10.0])
    assert neighbor_index_set(emb, 1, 0.5, NeighborhoodSpec(theiler_window=0)).size == 0


def test_neighbors_hand_built_matches_exhaustive_scan():
    points = [[0.0, 0.1], [0.2, 0.0], [0.9, 1.0], [0.1, 0.2], [1.0, 0.8], [0.15, 0.05]]
    emb = make_embedded(points)
    for dd in (False, True):
        for t in range(5):
            got = neighbor_index_set(emb, t, 0.5, NeighborhoodSpec(theiler_window=0, dd_condition=dd))
            assert list(got) == brute_force_neighbors(emb.points, t, 0.5, 0, dd)


def test_neighbors_theiler_window_excludes_close_times(rng):
    emb = make_embedded(rng.normal(size=(30, 1)))
    taus = neighbor_index_set(emb, 10, 100.0, NeighborhoodSpec(theiler_window=3))
    assert all(abs(11 - tau) > 3 for tau in taus)
    assert len(taus) == 29 - 7


@pytest.mark.parametrize("dd", [False, True])
def test_neighbor_sets_grow_with_radius(dd, rng):
    emb = make_embedded(rng.normal(size=(60, 2)))
    grid = grid_for(emb, e=0.01, n_eps=12)
    spec = NeighborhoodSpec(theiler_window=2, dd_condition=dd)
    for t in range(0, 59, 7):
        previous = set()
        for eps in grid.values:
            current = set(neighbor_index_set(emb, t, eps, spec))
            assert previous <= current
            previous = current


def test_dd_condition_restricts_neighbor_set(rng):
    emb = make_embedded(rng.normal(size=(50, 2)))
    for t in range(0, 49, 5):
        plain = set(neighbor_index_set(emb, t, 1.0, NeighborhoodSpec(theiler_window=1)))
        restricted = set(neighbor_index_set(emb, t, 1.0, NeighborhoodSpec(theiler_window=1, dd_condition=True)))
        assert restricted <= plain


def test_constant_cause_gives_zero_curve(rng):
    u = make_embedded(rng.normal(size=(40, 2)))
    v = make_embedded(np.full((40, 2), 0.7), label="v")
    curve = delta_profile(u, v, grid_for(u, 0.001, 33), NeighborhoodSpec(theiler_window=1))
    np.testing.assert_array_equal(curve.deltas, np.zeros(33))


def test_hand_built_pair_matches_oracle():
    u = make_embedded([[0.0], [0.4], [0.1], [0.9], [0.35], [0.8], [0.05], [0.5]])
    v = make_embedded([[1.0, 0.0], [0.2, 0.3], [0.7, 0.7], [0.1, 0.9], [0.5, 0.5], [0.3, 0.2], [0.9, 0.1], [0.6, 0.4]], label="v")
    grid = build_epsilon_grid(diameter(u), e=0.05, n_eps=9)
    for dd in (False, True):
        spec = NeighborhoodSpec(theiler_window=0, dd_condition=dd)
        curve = delta_profile(u, v, grid, spec)
        deltas, kept, populated, pairs = brute_force_profile(u.points, v.points, grid.values, 0, dd)
        np.testing.assert_array_equal(curve.deltas, deltas)
        assert curve.n_included == kept
        np.testing.assert_array_equal(curve.populated, populated)
        np.testing.assert_array_equal(curve.neighbor_pairs, pairs)


def test_delta_profile_matches_oracle_on_random_instances():
    rng = np.random.default_rng(2024)
    for instance in range(50):
        t0 = int(rng.integers(10, 121))
        d_u, d_v = (int(k) for k in rng.integers(1, 4, size=2))
        u = make_embedded(rng.normal(size=(t0, d_u)))
        v = make_embedded(rng.normal(size=(t0, d_v)), label="v")
        theiler = int(rng.integers(0, 4))
        grid = build_epsilon_grid(diameter(u), e=float(rng.choice([0.001, 0.05])), n_eps=int(rng.choice([5, 33])))
        dd = bool(instance % 2)
        spec = NeighborhoodSpec(theiler_window=theiler, dd_condition=dd)

        shells = build_shell_table(u, grid) if instance % 4 >= 2 else None
        curve = delta_profile(u, v, grid, spec, block_size=int(rng.integers(1, 40)), shells=shells)
        deltas, kept, populated, pairs = brute_force_profile(u.points, v.points, grid.values, theiler, dd)
        np.testing.assert_array_equal(curve.deltas, deltas)
        assert curve.n_included == kept
        np.testing.assert_array_equal(curve.populated, populated)
        np.testing.assert_array_equal(curve.neighbor_pairs, pairs)

        t = int(rng.integers(0, t0 - 1))
        eps = float(grid.values[int(rng.integers(0, grid.count))])
        assert list(neighbor_index_set(u, t, eps, spec)) == brute_force_neighbors(u.points, t, eps, theiler, dd)


def test_reordered_shell_table_matches_shuffled_points(rng):
    u = make_embedded(rng.normal(size=(90, 2)))
    v = make_embedded(rng.normal(size=(90, 2)), label="v")
    grid = grid_for(u, 0.001, 21)
    table = build_shell_table(u, grid)
    order = np.concatenate([np.arange(60, 90), np.arange(0, 30), np.arange(30, 60)])
    shuffled = u.with_points(u.points[order])
    for dd in (False, True):
        spec = NeighborhoodSpec(theiler_window=2, dd_condition=dd)
        direct = delta_profile(shuffled, v, grid, spec)
        cached = delta_profile(shuffled, v, grid, spec, shells=table.reordered(order))
        np.testing.assert_array_equal(cached.deltas, direct.deltas)
        np.testing.assert_array_equal(cached.neighbor_pairs, direct.neighbor_pairs)


def test_shell_table_size_must_match_series(rng):
    u = make_embedded(rng.normal(size=(30, 2)))
    grid = grid_for(u, 0.001, 9)
    table = build_shell_table(make_embedded(rng.normal(size=(31, 2))), grid)
    with pytest.raises(ValueError):
        delta_profile(u, u, grid, NeighborhoodSpec(theiler_window=1), shells=table)


def test_identical_chaotic_series_curve_is_positive_and_rising():
    orbit = logistic_orbit(length=500)
    emb = make_embedded(np.column_stack([orbit.values[:-2], orbit.values[1:-1], orbit.values[2:]]))
    curve = delta_profile(emb, emb, grid_for(emb, 0.001, 33), NeighborhoodSpec(theiler_window=3))
    assert np.all(curve.deltas > 0)
    assert curve.deltas[-1] > curve.deltas[0]


def test_deltas_bounded_by_cause_diameter(rng):
    u = make_embedded(rng.normal(size=(80, 2)))
    v = make_embedded(rng.uniform(size=(80, 3)), label="v")
    curve = delta_profile(u, v, grid_for(u, 0.001, 33), NeighborhoodSpec(theiler_window=2))
    assert np.all(curve.deltas >= 0)
    assert np.all(curve.deltas <= diameter(v))


def test_result_independent_of_thread_count(rng):
    u = make_embedded(rng.normal(size=(150, 2)))
    v = make_embedded(rng.normal(size=(150, 2)), label="v")
    grid = grid_for(u, 0.001, 33)
    spec = NeighborhoodSpec(theiler_window=2)
    single = delta_profile(u, v, grid, spec, threads=1, block_size=150)
    parallel = delta_profile(u, v, grid, spec, threads=4, block_size=7)
    np.testing.assert_array_equal(single.deltas, parallel.deltas)
    np.testing.assert_array_equal(single.neighbor_pairs, parallel.neighbor_pairs)


def test_translation_invariance(dyadic_points):
    u_points, v_points = dyadic_points(70, 2), dyadic_points(70, 3)
    u, v = make_embedded(u_points), make_embedded(v_points, label="v")
    u_shift = make_embedded(u_points + np.array([3.0, -2.0]))
    v_shift = make_embedded(v_points + np.array([-1.0, 5.0, 2.0]), label="v")
    spec = NeighborhoodSpec(theiler_window=1)

    assert diameter(u) == diameter(u_shift)
    grid = grid_for(u, 0.001, 33)
    for t in (0, 20, 68):
        np.testing.assert_array_equal(neighbor_index_set(u, t, grid.values[20], spec),
                                      neighbor_index_set(u_shift, t, grid.values[20], spec))
    base = delta_profile(u, v, grid, spec)
    moved = delta_profile(u_shift, v_shift, grid_for(u_shift, 0.001, 33), spec)
    np.testing.assert_array_equal(base.deltas, moved.deltas)
    assert estimate_slope(base).slope == estimate_slope(moved).slope


@pytest.mark.parametrize("factor", [2.0, 0.25])
def test_cause_scale_covariance(factor, rng):
    u = make_embedded(rng.normal(size=(90, 2)))
    v_points = rng.normal(size=(90, 2))
    v = make_embedded(v_points, label="v")
    v_scaled = make_embedded(v_points * factor, label="v")
    grid = grid_for(u, 0.001, 33)
    spec = NeighborhoodSpec(theiler_window=1)

    base = delta_profile(u, v, grid, spec)
    scaled = delta_profile(u, v_scaled, grid, spec)
    np.testing.assert_array_equal(scaled.deltas, base.deltas * factor)
    assert estimate_slope(scaled).slope == pytest.approx(factor * estimate_slope(base).slope, rel=1e-12)


def test_effect_scale_with_grid_leaves_curve_unchanged(rng):
    u_points = rng.normal(size=(90, 2))
    u, u_scaled = make_embedded(u_points), make_embedded(u_points * 4.0)
    v = make_embedded(rng.normal(size=(90, 1)), label="v")
    grid = grid_for(u, 0.001, 33)
    spec = NeighborhoodSpec(theiler_window=1)
    np.testing.assert_array_equal(
        delta_profile(u, v, grid, spec).deltas,
        delta_profile(u_scaled, v, grid.scaled(4.0), spec).deltas,
    )


def test_slope_of_exact_line():
    log_eps = np.linspace(np.log(0.001), 0.0, 33)
    fit = estimate_slope(_curve(log_eps, 0.5 * log_eps + 1.0))
    assert fit.slope == pytest.approx(0.5, rel=1e-12)
    assert fit.intercept == pytest.approx(1.0, rel=1e-12)
    assert fit.residual_rms == pytest.approx(0.0, abs=1e-12)
    assert len(fit.fit_indices) >= 2


def test_slope_of_flat_curve_is_zero():
    log_eps = np.linspace(np.log(0.001), 0.0, 33)
    fit = estimate_slope(_curve(log_eps, np.full(33, 0.3)))
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_slope_picks_the_steep_segment():
    log_eps = np.linspace(np.log(0.001), 0.0, 33)
    deltas = 0.2 * (np.clip(log_eps, log_eps[7], log_eps[25]) - log_eps[7])
    fit = estimate_slope(_curve(log_eps, deltas))
    assert fit.slope == pytest.approx(0.2, rel=0.1)
    assert all(7 <= j <= 25 for j in fit.fit_indices)


def test_slope_independent_of_storage_order(rng):
    log_eps = np.linspace(np.log(0.001), 0.0, 33)
    deltas = np.tanh(log_eps + 3.0) + 0.01 * rng.normal(size=33)
    order = rng.permutation(33)
    assert estimate_slope(_curve(log_eps[order], deltas[order])).slope == estimate_slope(_curve(log_eps, deltas)).slope


def test_slope_needs_three_points():
    with pytest.raises(InputSizeError):
        estimate_slope(_curve([0.0, 1.0], [0.0, 1.0]))
