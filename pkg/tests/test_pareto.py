import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dengue_moo import (
    ConfigurationError,
    DegenerateFrontError,
    dominates,
    filter_front,
    hypervolume_2d,
    hypervolume_monte_carlo,
    knee_point,
    nondominated_filter,
    normalize_objectives,
)
from dengue_moo.pareto import is_convex_front, knee_distances

point_sets = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(2)),
                    elements=st.floats(0.0, 1.0, allow_subnormal=False))


def brute_nondominated(pts):
    keep = [i for i, p in enumerate(pts) if not any(dominates(q, p) for q in pts)]
    # exact duplicates survive once
    out = []
    for i in keep:
        if not any(np.array_equal(pts[i], pts[j]) for j in out):
            out.append(i)
    return pts[out]


def test_dominance_examples():
    assert dominates((0.1, 0.2), (0.2, 0.3))
    assert not dominates((0.1, 0.3), (0.2, 0.2))
    assert not dominates((0.1, 0.2), (0.1, 0.2))


@given(point_sets)
def test_dominance_is_strict_partial_order(pts):
    n = len(pts)
    for i in range(n):
        assert not dominates(pts[i], pts[i])
        for j in range(n):
            if dominates(pts[i], pts[j]):
                assert not dominates(pts[j], pts[i])
                for k in range(n):
                    if dominates(pts[j], pts[k]):
                        assert dominates(pts[i], pts[k])


def test_filter_example():
    pts = [(0, 1), (1, 0), (0.5, 0.5), (0.6, 0.6)]
    np.testing.assert_array_equal(filter_front(pts), [[1, 0], [0.5, 0.5], [0, 1]])
    np.testing.assert_array_equal(filter_front([(0.3, 0.4)]), [[0.3, 0.4]])
    np.testing.assert_array_equal(filter_front([(0.3, 0.4), (0.3, 0.4)]), [[0.3, 0.4]])


@given(point_sets)
def test_filter_matches_brute_force(pts):
    fast = filter_front(pts)
    slow = brute_nondominated(pts)
    assert len(fast) == len(slow)
    assert {tuple(p) for p in fast} == {tuple(p) for p in slow}
    assert np.all(np.diff(fast[:, 1]) >= 0)


@given(point_sets)
def test_filter_is_idempotent(pts):
    once = filter_front(pts)
    np.testing.assert_array_equal(filter_front(once), once)


def test_filter_empty():
    assert len(nondominated_filter(np.zeros((0, 2)))) == 0


def test_normalization_examples():
    ideal, nadir = np.array([1.0, 2.0]), np.array([3.0, 6.0])
    np.testing.assert_allclose(normalize_objectives([ideal, nadir, (ideal + nadir) / 2], ideal, nadir),
                               [[0, 0], [1, 1], [0.5, 0.5]])
    with pytest.raises(ConfigurationError):
        normalize_objectives([[0, 0]], [0, 1], [1, 1])


@given(point_sets, st.floats(0.1, 10.0))
def test_normalization_is_scale_invariant(pts, s):
    ideal, nadir = np.array([-0.5, -1.0]), np.array([2.0, 3.0])
    a = normalize_objectives(pts, ideal, nadir)
    b = normalize_objectives(3.0 * s * pts, 3.0 * s * ideal, 3.0 * s * nadir)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_hypervolume_examples():
    assert hypervolume_2d([(0.0, 0.0)]) == 1.0
    assert hypervolume_2d([(0.5, 0.5)]) == 0.25
    assert hypervolume_2d([(0.0, 0.5), (0.5, 0.0)]) == 0.75
    assert hypervolume_2d(np.zeros((0, 2))) == 0.0
    # on or beyond the reference contributes nothing
    assert hypervolume_2d([(1.0, 0.0), (0.2, 1.0), (1.5, 1.5)]) == 0.0


def test_hypervolume_example_against_sampling():
    mc = hypervolume_monte_carlo([(0.0, 0.5), (0.5, 0.0)], rng=0)
    assert abs(mc - 0.75) < 0.002


def grid_area(pts, n=400):
    # midpoint-cell count on an n x n grid, exact for grid-aligned points
    centers = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(centers, centers)
    covered = np.zeros_like(X, dtype=bool)
    for f1, f2 in pts:
        covered |= (X >= f1) & (Y >= f2)
    return covered.mean()


@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.just(2)), elements=st.integers(0, 400).map(lambda k: k / 400)))
def test_hypervolume_exact_on_grid_aligned_points(pts):
    assert hypervolume_2d(pts) == pytest.approx(grid_area(pts), abs=1e-12)


@given(point_sets, st.tuples(st.floats(0, 1), st.floats(0, 1)))
def test_hypervolume_monotone_under_insertion(pts, extra):
    assert hypervolume_2d(np.vstack([pts, extra])) >= hypervolume_2d(pts) - 1e-15


def test_knee_examples():
    knee = knee_point([(0, 1), (0.1, 0.1), (1, 0)])
    assert knee.point == (0.1, 0.1)
    assert knee.distance == pytest.approx(0.8 / np.sqrt(2))
    tie = knee_point([(0, 1), (0.2, 0.3), (0.3, 0.2), (1, 0)])
    assert tie.point == (0.2, 0.3)
    assert tie.distance == pytest.approx(0.5 / np.sqrt(2))


def test_knee_degenerate_cases():
    with pytest.raises(DegenerateFrontError):
        knee_point([(0, 1), (0.5, 0.5), (1, 0)])
    with pytest.raises(DegenerateFrontError):
        knee_point([(0, 1), (1, 0)])


def test_knee_only_counts_ideal_side():
    # the middle point bulges away from the ideal corner
    with pytest.raises(DegenerateFrontError):
        knee_point([(0, 1), (0.7, 0.7), (1, 0)])


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=20, unique=True),
       st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(-1, 1), st.floats(-1, 1))
def test_knee_invariant_under_affine_rescaling(xs, sx, sy, ox, oy):
    xs = np.sort(np.array(xs))
    pts = np.column_stack([xs, (1 - np.sqrt(xs)) ** 2])
    pts = np.vstack([[0.0, 1.0], pts, [1.0, 0.0]])
    d = knee_distances(pts)
    assume(np.partition(d, -2)[-2] < d.max() - 1e-9)
    scaled = pts * [sx, sy] + [ox, oy]
    norm = normalize_objectives(scaled, [ox, oy], [sx + ox, sy + oy])
    assert knee_point(norm).index == knee_point(pts).index


def test_convexity_probe():
    xs = np.linspace(0, 1, 11)
    assert is_convex_front(np.column_stack([xs, (1 - np.sqrt(xs)) ** 2]))
    assert not is_convex_front(np.column_stack([xs, 1 - xs**2]))
