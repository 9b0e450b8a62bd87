"""Measure construction, the synthetic generators, and serialization."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowode.measure import (
    DiscreteMeasure,
    SmoothedMeasure,
    cluster_spec,
    diameter,
    gen_circle,
    gen_three_clusters,
    gen_two_point,
    load_measure_csv,
    load_measure_json,
    measure_from_json,
    measure_to_json,
    philox_rng,
    save_measure_csv,
    save_measure_json,
    summary,
)

# weighted centroid of the three disk centers, (80*(1,2.5)+44*(2,1.5)+20*(3,3))/144
CENTROID = np.array([1.5833333333333333, 2.263888888888889])


def test_three_clusters_shape(three_clusters):
    assert three_clusters.n == 144
    assert three_clusters.d == 2
    assert np.all(three_clusters.weights == 1.0 / 144.0)


def test_three_clusters_cluster_radii():
    for seed in (0, 7, 123):
        m = gen_three_clusters(seed)
        for lo, hi, center, radius in (
            (0, 80, (1.0, 2.5), 0.4),
            (80, 124, (2.0, 1.5), 0.3),
            (124, 144, (3.0, 3.0), 0.2),
        ):
            r = np.linalg.norm(m.points[lo:hi] - np.asarray(center), axis=1)
            assert r.max() <= radius + 1e-12


def test_three_clusters_diameter_band(three_clusters):
    d = diameter(three_clusters.points)
    assert 2.0 <= d <= 2.9


def test_three_clusters_mean_near_centroid(three_clusters):
    # Monte Carlo spread of the generator mean stays well under 0.15
    assert np.linalg.norm(three_clusters.mean() - CENTROID) < 0.15


def test_three_clusters_deterministic():
    a = gen_three_clusters(42)
    b = gen_three_clusters(42)
    assert np.array_equal(a.points, b.points)
    c = gen_three_clusters(43)
    assert not np.array_equal(a.points, c.points)


def test_two_point_rows(two_point):
    assert np.array_equal(two_point.points, np.array([[-1.0], [1.0]]))
    assert np.array_equal(two_point.weights, np.array([0.5, 0.5]))


def test_summary_two_point(two_point):
    s = summary(two_point)
    assert s.mean[0] == 0.0
    assert s.diameter == 2.0
    assert s.second_moment == 1.0
    assert (s.n, s.d) == (2, 1)


def test_summary_single_point():
    m = DiscreteMeasure(np.array([[2.0, -3.0]]), np.array([1.0]))
    s = summary(m)
    assert np.array_equal(s.mean, [2.0, -3.0])
    assert s.diameter == 0.0


@settings(max_examples=40)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2**31))
def test_second_moment_dominates_mean_norm(n, seed):
    # Jensen: E||X||^2 >= ||E X||^2
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, 3))
    w = rng.random(n) + 1e-3
    m = DiscreteMeasure(pts, w / w.sum())
    s = summary(m)
    assert s.second_moment >= float(np.dot(s.mean, s.mean)) - 1e-12


def test_circle_small_case():
    m = gen_circle(4, 1.0)
    want = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    assert np.allclose(m.points, want, atol=1e-15)


def test_circle_norms_and_spacing():
    m = gen_circle(2048, 1.0)
    norms = np.linalg.norm(m.points, axis=1)
    assert np.abs(norms - 1.0).max() <= 1e-12
    nn = np.linalg.norm(m.points[1:] - m.points[:-1], axis=1)
    arc = 2.0 * np.pi / 2048
    assert np.abs(nn - arc).max() / arc < 0.01


def test_circle_needs_three_points():
    with pytest.raises(ValueError):
        gen_circle(2)


def test_measure_validation():
    pts = np.array([[0.0], [1.0]])
    with pytest.raises(ValueError):
        DiscreteMeasure(pts, np.array([0.7, 0.7]))  # sum != 1
    with pytest.raises(ValueError):
        DiscreteMeasure(pts, np.array([1.0, 0.0]))  # zero weight
    with pytest.raises(ValueError):
        DiscreteMeasure(np.array([[np.nan], [1.0]]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        DiscreteMeasure(np.empty((0, 1)), np.empty(0))


def test_measure_arrays_read_only(two_point):
    with pytest.raises(ValueError):
        two_point.points[0, 0] = 5.0


def test_smoothed_measure_delta(three_clusters):
    sm = SmoothedMeasure(three_clusters, 0.25)
    assert sm.delta == 0.25
    with pytest.raises(ValueError):
        SmoothedMeasure(three_clusters, -0.1)


def test_cluster_spec_fields(three_clusters):
    spec = cluster_spec(three_clusters, range(124, 144))
    assert spec.weight == pytest.approx(20.0 / 144.0, rel=1e-15)
    assert spec.diameter == diameter(three_clusters.points[124:144])
    assert spec.diameter <= 0.4 + 1e-12
    with pytest.raises(ValueError):
        cluster_spec(three_clusters, [3, 3])
    with pytest.raises(ValueError):
        cluster_spec(three_clusters, [144])


def test_csv_round_trip_exact(tmp_path, three_clusters):
    path = tmp_path / "m.csv"
    save_measure_csv(three_clusters, path)
    back = load_measure_csv(path)
    assert np.array_equal(back.points, three_clusters.points)
    assert np.array_equal(back.weights, three_clusters.weights)
    assert path.read_text().splitlines()[0] == "w,x0,x1"


def test_csv_header_required(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.5,-1.0\n0.5,1.0\n")
    with pytest.raises(ValueError):
        load_measure_csv(bad)


def test_json_round_trip(tmp_path, two_point):
    doc = measure_to_json(two_point)
    assert doc["n"] == 2 and doc["d"] == 1
    back = measure_from_json(doc)
    assert np.array_equal(back.points, two_point.points)

    path = tmp_path / "m.json"
    save_measure_json(two_point, path)
    assert np.array_equal(load_measure_json(path).weights, two_point.weights)


def test_json_consistency_check():
    with pytest.raises(ValueError):
        measure_from_json({"d": 2, "n": 1, "points": [[0.0]], "weights": [1.0]})


def test_philox_streams_independent():
    a = philox_rng(5, stream=0).standard_normal(4)
    b = philox_rng(5, stream=0).standard_normal(4)
    c = philox_rng(5, stream=1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_serialized_files_are_stable(tmp_path, three_clusters):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    save_measure_csv(three_clusters, p1)
    save_measure_csv(three_clusters, p2)
    assert p1.read_bytes() == p2.read_bytes()
