import itertools

import numpy as np
import pytest

from flowode.geometry import (
    dist_conv_hull,
    in_shrunk_voronoi,
    point_stats,
    separation,
    validate_local_cluster,
)
from flowode.measure import DiscreteMeasure, cluster_spec, philox_rng

TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def brute_hull_distance(points, x, steps=200):
    """Grid search over barycentric coefficients, up to 3 generators."""
    best = np.inf
    k = len(points)
    if k == 1:
        return float(np.linalg.norm(points[0] - x))
    grid = np.linspace(0.0, 1.0, steps + 1)
    if k == 2:
        for a in grid:
            y = a * points[0] + (1 - a) * points[1]
            best = min(best, float(np.linalg.norm(y - x)))
        return best
    for a in grid:
        for b in np.linspace(0.0, 1.0 - a, int((1 - a) * steps) + 1):
            y = a * points[0] + b * points[1] + (1 - a - b) * points[2]
            best = min(best, float(np.linalg.norm(y - x)))
    return best


def test_interior_point_distance_zero():
    pr = dist_conv_hull(TRIANGLE, np.array([0.2, 0.2]))
    assert pr.distance <= 1e-12


def test_segment_projection():
    pr = dist_conv_hull(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([0.5, 1.0]))
    assert pr.distance == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(pr.projection, [0.5, 0.0], atol=1e-12)


def test_single_point_hull():
    pr = dist_conv_hull(np.array([[0.0, 0.0]]), np.array([3.0, 4.0]))
    assert pr.distance == 5.0
    assert np.array_equal(pr.projection, [0.0, 0.0])


def test_triangle_outside_corner():
    # nearest point of the hypotenuse to (0.9, 0.9) is (0.5, 0.5)
    pr = dist_conv_hull(TRIANGLE, np.array([0.9, 0.9]))
    assert pr.distance == pytest.approx(0.5656854249492381, abs=1e-12)
    assert np.allclose(pr.projection, [0.5, 0.5], atol=1e-12)


def test_matches_brute_force_small_hulls():
    rng = philox_rng(21, 0)
    for k in (1, 2, 3):
        for _ in range(8):
            pts = rng.standard_normal((k, 2)) * 2.0
            x = rng.standard_normal(2) * 3.0
            got = dist_conv_hull(pts, x).distance
            ref = brute_hull_distance(pts, x)
            assert got <= ref + 1e-6
            assert got >= ref - 2e-2  # grid resolution limits the oracle


def test_projection_consistency_fields():
    rng = philox_rng(22, 0)
    pts = rng.standard_normal((30, 3))
    x = rng.standard_normal(3) * 4.0
    pr = dist_conv_hull(pts, x)
    assert np.all(pr.coefficients >= 0.0)
    assert abs(pr.coefficients.sum() - 1.0) <= 1e-10
    assert np.linalg.norm(pr.coefficients @ pts - pr.projection) <= 1e-10
    assert pr.distance == pytest.approx(np.linalg.norm(pr.projection - x), abs=1e-12)


def test_interior_convex_combinations_land_at_zero():
    rng = philox_rng(23, 0)
    for _ in range(50):
        pts = rng.standard_normal((10, 3)) * 3.0
        w = rng.random(10)
        w /= w.sum()
        pr = dist_conv_hull(pts, w @ pts, tol=1e-14)
        assert pr.distance <= 1e-10


def test_hull_distance_never_exceeds_vertex_distance():
    rng = philox_rng(24, 0)
    pts = rng.standard_normal((25, 2))
    for _ in range(20):
        x = rng.standard_normal(2) * 10.0
        pr = dist_conv_hull(pts, x)
        nearest = float(np.linalg.norm(pts - x, axis=1).min(initial=np.inf))
        assert pr.distance <= nearest + 1e-12


def test_hull_input_validation():
    with pytest.raises(ValueError):
        dist_conv_hull(np.empty((0, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        dist_conv_hull(TRIANGLE, np.zeros(3))
    with pytest.raises(ValueError):
        dist_conv_hull(np.array([[np.inf, 0.0]]), np.zeros(2))


def test_shrunk_voronoi_center_membership(three_clusters):
    for i in (0, 80, 143):
        eps = 0.5 * separation(three_clusters, i)
        assert in_shrunk_voronoi(three_clusters, i, eps, three_clusters.points[i])


def test_shrunk_voronoi_bisector(two_point):
    x = np.array([0.0])
    assert in_shrunk_voronoi(two_point, 0, 0.0, x)
    assert in_shrunk_voronoi(two_point, 1, 0.0, x)
    assert not in_shrunk_voronoi(two_point, 0, 0.5, x)
    assert not in_shrunk_voronoi(two_point, 1, 0.5, x)


def test_shrunk_voronoi_validation(two_point):
    with pytest.raises(ValueError):
        in_shrunk_voronoi(two_point, 2, 0.0, np.array([0.0]))
    with pytest.raises(ValueError):
        in_shrunk_voronoi(two_point, 0, -0.1, np.array([0.0]))


def test_zero_shrink_cells_cover_space(three_clusters):
    rng = philox_rng(25, 0)
    for _ in range(25):
        x = three_clusters.mean() + 3.0 * rng.standard_normal(2)
        hits = [
            i for i in range(three_clusters.n) if in_shrunk_voronoi(three_clusters, i, 0.0, x)
        ]
        assert hits


def test_shrunk_cell_is_convex(three_clusters):
    # midpoints of random member pairs stay inside
    rng = philox_rng(26, 0)
    i = 130
    eps = 0.4 * separation(three_clusters, i)
    xi = three_clusters.points[i]
    members = []
    while len(members) < 12:
        cand = xi + 0.3 * rng.standard_normal(2)
        if in_shrunk_voronoi(three_clusters, i, eps, cand):
            members.append(cand)
    for a, b in itertools.combinations(members, 2):
        assert in_shrunk_voronoi(three_clusters, i, eps, 0.5 * (a + b))


def test_point_stats_two_point(two_point):
    st = point_stats(two_point, np.array([0.2]))
    assert st.d1 == pytest.approx(0.8, rel=1e-15)
    assert st.d2 == pytest.approx(1.2, rel=1e-15)
    assert st.gap == pytest.approx(0.8, rel=1e-12)
    assert st.nn_indices == (1,)


def test_point_stats_bisector_tie(two_point):
    st = point_stats(two_point, np.array([0.0]))
    assert len(st.nn_indices) == 2
    assert st.gap == 0.0


def test_point_stats_needs_two_atoms():
    single = DiscreteMeasure(np.array([[0.0]]), np.array([1.0]))
    with pytest.raises(ValueError):
        point_stats(single, np.array([0.0]))


def test_gap_zero_iff_tied(three_clusters):
    rng = philox_rng(27, 0)
    for _ in range(30):
        x = three_clusters.mean() + 2.0 * rng.standard_normal(2)
        st = point_stats(three_clusters, x)
        if st.gap == 0.0:
            assert len(st.nn_indices) >= 2
        else:
            assert len(st.nn_indices) == 1


def test_separation_two_point(two_point):
    assert separation(two_point, 0) == 2.0
    assert separation(two_point, 1) == 2.0


def test_local_cluster_isolated():
    m = DiscreteMeasure(
        np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 0.0]]), np.full(3, 1.0 / 3.0)
    )
    check = validate_local_cluster(m, cluster_spec(m, [0, 1]))
    assert check.holds
    assert check.worst_margin == pytest.approx(9.9 - 0.2, rel=1e-12)


def test_local_cluster_overlapping():
    m = DiscreteMeasure(
        np.array([[0.0, 0.0], [1.0, 0.0], [1.5, 0.0]]), np.full(3, 1.0 / 3.0)
    )
    check = validate_local_cluster(m, cluster_spec(m, [0, 1]))
    assert not check.holds
    assert check.worst_margin < 0.0


def test_local_cluster_needs_complement(two_point):
    with pytest.raises(ValueError):
        validate_local_cluster(two_point, cluster_spec(two_point, [0, 1]))


def test_three_cluster_smallest_is_local(three_clusters):
    spec = cluster_spec(three_clusters, range(124, 144))
    assert validate_local_cluster(three_clusters, spec).holds
