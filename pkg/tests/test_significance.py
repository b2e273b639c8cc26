"""Tests for segment-shuffle surrogates and Gaussian p-values."""

import numpy as np
import pytest

from config.detection_config import SurrogateConfig
from core.errors import InputSizeError
from core.scaling import NeighborhoodSpec, grid_for
from core.significance import (
    gaussian_p_value,
    normal_cdf,
    segment_order,
    segment_shuffle,
    summarize_slopes,
    surrogate_p_value,
)

from conftest import make_embedded


def _sorted_rows(points):
    return points[np.lexsort(points.T[::-1])]


def test_single_segment_is_identity(rng):
    emb = make_embedded(rng.normal(size=(20, 2)))
    np.testing.assert_array_equal(segment_shuffle(emb, 1, seed=3).points, emb.points)


def test_block_lengths_and_multiset():
    emb = make_embedded(np.arange(10.0))
    shuffled = segment_shuffle(emb, 3, seed=11).points[:, 0]
    # blocks [0..3], [4..7], [8, 9] in some order
    blocks = []
    start = 0
    while start < 10:
        first = int(shuffled[start])
        length = 2 if first == 8 else 4
        np.testing.assert_array_equal(shuffled[start:start + length], np.arange(first, first + length))
        blocks.append(first)
        start += length
    assert sorted(blocks) == [0, 4, 8]
    np.testing.assert_array_equal(np.sort(shuffled), np.arange(10.0))


@pytest.mark.parametrize("n_segments", [2, 5, 25, 77])
def test_shuffle_preserves_point_multiset(n_segments, rng):
    emb = make_embedded(rng.normal(size=(77, 3)))
    shuffled = segment_shuffle(emb, n_segments, seed=n_segments)
    np.testing.assert_array_equal(_sorted_rows(shuffled.points), _sorted_rows(emb.points))


def test_identity_permutation_leaves_points_unchanged(rng):
    emb = make_embedded(rng.normal(size=(12, 1)))
    for seed in range(200):
        if list(np.random.default_rng(seed).permutation(2)) == [0, 1]:
            np.testing.assert_array_equal(segment_shuffle(emb, 2, seed=seed).points, emb.points)
            break
    else:
        pytest.fail("no identity permutation among 200 seeds")


def test_shuffle_is_seeded(rng):
    emb = make_embedded(rng.normal(size=(50, 2)))
    np.testing.assert_array_equal(segment_shuffle(emb, 10, 5).points, segment_shuffle(emb, 10, 5).points)


def test_too_many_segments():
    with pytest.raises(InputSizeError):
        segment_shuffle(make_embedded(np.arange(5.0)), 6, seed=0)


def test_segment_order_drives_shuffle(rng):
    emb = make_embedded(rng.normal(size=(33, 2)))
    order = segment_order(33, 4, seed=8)
    np.testing.assert_array_equal(np.sort(order), np.arange(33))
    np.testing.assert_array_equal(segment_shuffle(emb, 4, seed=8).points, emb.points[order])


def test_normal_cdf_values():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-7)
    assert normal_cdf(-10.0) < 1e-20


def test_p_value_at_mean_is_half():
    assert gaussian_p_value(1.3, 1.3, 0.2) == 0.5


def test_p_value_at_95th_percentile():
    assert gaussian_p_value(2.0 + 1.6449 * 0.5, 2.0, 0.5) == pytest.approx(0.05, abs=1e-4)


def test_p_value_with_zero_spread():
    assert gaussian_p_value(1.0, 1.0, 0.0) == 0.5


def test_p_value_decreases_with_slope():
    p = [gaussian_p_value(s, 0.0, 1.0) for s in np.linspace(-3, 3, 13)]
    assert all(a >= b for a, b in zip(p, p[1:]))
    assert all(0.0 <= x <= 1.0 for x in p)


def test_summary_uses_population_std_over_all_slopes():
    result = summarize_slopes(3.0, [1.0, 2.0])
    assert result.mean == 2.0
    assert result.std == pytest.approx(np.sqrt(2.0 / 3.0))
    assert result.p_value == pytest.approx(1.0 - normal_cdf(1.0 / np.sqrt(2.0 / 3.0)))


def _noise_pair(seed, length=120):
    rng = np.random.default_rng(seed)
    return make_embedded(rng.normal(size=(length, 2))), make_embedded(rng.normal(size=(length, 2)), label="v")


def test_surrogate_p_value_is_deterministic_across_threads():
    u, v = _noise_pair(1)
    grid = grid_for(u, 0.001, 33)
    spec = NeighborhoodSpec(theiler_window=2)
    cfg = SurrogateConfig(n_segments=10, n_replicates=6, master_seed=99)
    serial = surrogate_p_value(u, v, grid, spec, cfg, threads=1)
    parallel = surrogate_p_value(u, v, grid, spec, cfg, threads=3)
    np.testing.assert_array_equal(serial.surrogate_slopes, parallel.surrogate_slopes)
    assert serial.p_value == parallel.p_value
    assert len(serial.surrogate_slopes) == 6


def test_surrogate_seed_changes_replicates():
    u, v = _noise_pair(2)
    grid = grid_for(u, 0.001, 33)
    spec = NeighborhoodSpec(theiler_window=2)
    a = surrogate_p_value(u, v, grid, spec, SurrogateConfig(n_segments=10, n_replicates=4, master_seed=1))
    b = surrogate_p_value(u, v, grid, spec, SurrogateConfig(n_segments=10, n_replicates=4, master_seed=2))
    assert a.original_slope == b.original_slope
    assert not np.array_equal(a.surrogate_slopes, b.surrogate_slopes)
    assert 0.0 <= a.p_value <= 1.0


def test_constant_cause_gives_half():
    u, _ = _noise_pair(3)
    v = make_embedded(np.zeros((120, 1)), label="v")
    result = surrogate_p_value(u, v, grid_for(u, 0.001, 33), NeighborhoodSpec(theiler_window=1),
                               SurrogateConfig(n_segments=5, n_replicates=3))
    assert result.std == 0.0
    assert result.p_value == 0.5


def test_shell_table_does_not_change_surrogates(monkeypatch):
    u, v = _noise_pair(4)
    grid = grid_for(u, 0.001, 33)
    spec = NeighborhoodSpec(theiler_window=2)
    cfg = SurrogateConfig(n_segments=8, n_replicates=5, master_seed=3)
    cached = surrogate_p_value(u, v, grid, spec, cfg)
    monkeypatch.setattr("core.scaling.SHELL_TABLE_MAX_POINTS", 0)
    direct = surrogate_p_value(u, v, grid, spec, cfg)
    np.testing.assert_array_equal(cached.surrogate_slopes, direct.surrogate_slopes)
    assert cached.original_slope == direct.original_slope
