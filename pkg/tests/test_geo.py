import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely import Polygon, intersects_xy

from hotspot_disambig.geo import (
    EARTH_RADIUS_M, AntimeridianError, DuplicateIdError, GeoPoint, PolygonGeom, STIndex, TimeInterval,
    build_st_index, haversine_array, haversine_distance, point_in_polygon, points_in_polygon,
    query_polygon_time, query_radius_time,
)
from oracles import haversine_m

lats = st.floats(-90, 90, allow_nan=False)
lons = st.floats(-180, 179.999, allow_nan=False)
points = st.builds(GeoPoint, lats, lons)

UNIT_SQUARE = PolygonGeom.from_lonlat([(0, 0), (1, 0), (1, 1), (0, 1)])


def test_geopoint_validation_and_normalization():
    assert GeoPoint(10, 190).lon == -170
    assert GeoPoint(10, 180).lon == -180
    assert GeoPoint(10, -180).lon == -180
    with pytest.raises(ValueError):
        GeoPoint(91, 0)
    with pytest.raises(ValueError):
        GeoPoint(float("nan"), 0)


def test_time_interval_rejects_reversed():
    with pytest.raises(ValueError):
        TimeInterval(5, 4)
    assert TimeInterval(4, 4).contains(4)


@given(points)
def test_haversine_identity(p):
    assert haversine_distance(p, p) == 0.0


def test_haversine_half_circumference():
    d = haversine_distance(GeoPoint(0, 0), GeoPoint(0, 180))
    assert abs(d - math.pi * EARTH_RADIUS_M) < 1.0
    assert abs(d - 20_015_114) < 1.0


def test_haversine_paris_london_matches_oracle():
    d = haversine_distance(GeoPoint(48.8566, 2.3522), GeoPoint(51.5074, -0.1278))
    assert abs(d - haversine_m(48.8566, 2.3522, 51.5074, -0.1278)) < 0.1
    assert 343_000 < d < 344_500


@given(points, points)
def test_haversine_symmetric_nonnegative(a, b):
    d1, d2 = haversine_distance(a, b), haversine_distance(b, a)
    assert d1 >= 0
    assert d1 == pytest.approx(d2, rel=1e-12, abs=1e-6)


@given(points, points, points)
def test_haversine_triangle_inequality(a, b, c):
    ab, bc, ac = haversine_distance(a, b), haversine_distance(b, c), haversine_distance(a, c)
    assert ac <= (ab + bc) * (1 + 1e-6) + 1e-6


def test_haversine_array_matches_scalar(rng):
    lat1, lat2 = rng.uniform(-80, 80, (2, 50))
    lon1, lon2 = rng.uniform(-180, 180, (2, 50))
    ref = [haversine_m(*v) for v in zip(lat1, lon1, lat2, lon2)]
    np.testing.assert_allclose(haversine_array(lat1, lon1, lat2, lon2), ref, rtol=1e-12, atol=1e-6)


def test_point_in_unit_square():
    assert point_in_polygon(GeoPoint(0.5, 0.5), UNIT_SQUARE)
    assert not point_in_polygon(GeoPoint(2, 2), UNIT_SQUARE)


def test_boundary_counts_inside():
    for lat, lon in [(0, 0.5), (1, 0.5), (0.5, 0), (0.5, 1), (0, 0), (1, 1)]:
        assert point_in_polygon(GeoPoint(lat, lon), UNIT_SQUARE), (lat, lon)


def test_hole_subtracts():
    # 4x4 square with a 2x2 hole in the middle
    poly = PolygonGeom.from_lonlat(
        [(0, 0), (4, 0), (4, 4), (0, 4)], holes=[[(1, 1), (3, 1), (3, 3), (1, 3)]]
    )
    assert not point_in_polygon(GeoPoint(2, 2), poly)
    assert point_in_polygon(GeoPoint(0.5, 0.5), poly)
    assert point_in_polygon(GeoPoint(3.5, 2), poly)
    assert not point_in_polygon(GeoPoint(5, 5), poly)
    # the hole's edge is still part of the polygon
    assert point_in_polygon(GeoPoint(1, 2), poly)


def test_ring_needs_three_distinct_vertices():
    with pytest.raises(ValueError):
        PolygonGeom.from_lonlat([(0, 0), (1, 1), (0, 0)])


def test_antimeridian_polygon_rejected():
    with pytest.raises(AntimeridianError):
        PolygonGeom.from_lonlat([(179, 0), (-179, 0), (-179, 1), (179, 1)])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12), st.integers(0, 11))
def test_point_in_polygon_rotation_invariant(seed, k, shift):
    rng = np.random.default_rng(seed)
    ring = [(float(x), float(y)) for x, y in rng.uniform(0, 10, size=(k, 2))]
    if len(set(ring)) < 3:
        return
    poly = PolygonGeom.from_lonlat(ring)
    s = shift % k
    rotated = PolygonGeom.from_lonlat(ring[s:] + ring[:s])
    lat, lon = rng.uniform(-1, 11, size=(2, 200))
    np.testing.assert_array_equal(points_in_polygon(lat, lon, poly), points_in_polygon(lat, lon, rotated))


def test_point_in_polygon_matches_shapely_on_simple_polygons(rng):
    # star-shaped rings are simple, so even-odd agrees with shapely's covers
    for _ in range(20):
        k = int(rng.integers(3, 12))
        angles = np.sort(rng.uniform(0, 2 * np.pi, k))
        radii = rng.uniform(0.5, 2, k)
        ring = np.c_[5 + radii * np.cos(angles), 5 + radii * np.sin(angles)]
        if len(np.unique(ring, axis=0)) < 3:
            continue
        poly = PolygonGeom.from_lonlat(ring.tolist())
        lat, lon = rng.uniform(2.5, 7.5, size=(2, 400))
        expected = intersects_xy(Polygon(ring), lon, lat)
        np.testing.assert_array_equal(points_in_polygon(lat, lon, poly), expected)


def _random_records(rng, n, region=(35, 45, -5, 15), span=30 * 86400):
    lat = rng.uniform(region[0], region[1], n)
    lon = rng.uniform(region[2], region[3], n)
    t = rng.integers(0, span, n)
    return np.arange(n, dtype=np.int64) + 1, lat, lon, t


def test_empty_index_returns_empty():
    idx = build_st_index([])
    assert len(idx) == 0
    assert query_radius_time(idx, GeoPoint(0, 0), 1e6, TimeInterval(0, 10**9)) == set()
    assert query_polygon_time(idx, UNIT_SQUARE, TimeInterval(0, 10**9)) == set()


def test_duplicate_ids_rejected():
    with pytest.raises(DuplicateIdError):
        build_st_index([(1, GeoPoint(0, 0), 0), (1, GeoPoint(1, 1), 5)])


def test_radius_zero_hits_exact_point():
    idx = build_st_index([(7, GeoPoint(40, 10), 100), (8, GeoPoint(40.001, 10), 100)])
    assert query_radius_time(idx, GeoPoint(40, 10), 0.0, TimeInterval(0, 200)) == {7}
    assert query_radius_time(idx, GeoPoint(40, 10), 0.0, TimeInterval(0, 50)) == set()


def test_degenerate_interval_and_covering_polygon(rng):
    ids, lat, lon, t = _random_records(rng, 500, region=(0.1, 0.9, 0.1, 0.9), span=100)
    idx = STIndex(ids, lat, lon, t)
    assert query_polygon_time(idx, UNIT_SQUARE, TimeInterval(0, 100)) == set(ids.tolist())
    assert query_polygon_time(idx, UNIT_SQUARE, TimeInterval(42, 42)) == set(ids[t == 42].tolist())


def test_radius_queries_match_brute_force(rng):
    ids, lat, lon, t = _random_records(rng, 1000, region=(40, 41, 10, 11), span=10 * 86400)
    idx = STIndex(ids, lat, lon, t)
    for _ in range(100):
        c = GeoPoint(rng.uniform(39.9, 41.1), rng.uniform(9.9, 11.1))
        radius = float(rng.uniform(0, 30_000))
        a = int(rng.integers(-86400, 10 * 86400))
        win = TimeInterval(a, a + int(rng.integers(0, 5 * 86400)))
        d = np.array([haversine_m(c.lat, c.lon, la, lo) for la, lo in zip(lat, lon)])
        expected = set(ids[(d <= radius) & (t >= win.start) & (t <= win.end)].tolist())
        assert query_radius_time(idx, c, radius, win) == expected


def test_polygon_queries_match_brute_force(rng):
    ids, lat, lon, t = _random_records(rng, 1000, region=(40, 41, 10, 11), span=10 * 86400)
    idx = STIndex(ids, lat, lon, t)
    for _ in range(100):
        cx, cy = rng.uniform(10, 11), rng.uniform(40, 41)
        k = int(rng.integers(3, 9))
        ang = np.sort(rng.uniform(0, 2 * np.pi, k))
        rad = rng.uniform(0.05, 0.4, k)
        ring = np.c_[cx + rad * np.cos(ang), cy + rad * np.sin(ang)]
        poly = PolygonGeom.from_lonlat(ring.tolist())
        a = int(rng.integers(0, 10 * 86400))
        win = TimeInterval(a, a + int(rng.integers(0, 3 * 86400)))
        inside = intersects_xy(Polygon(ring), lon, lat)
        expected = set(ids[inside & (t >= win.start) & (t <= win.end)].tolist())
        assert query_polygon_time(idx, poly, win) == expected


def test_radius_query_across_antimeridian():
    idx = build_st_index([(1, GeoPoint(0, 179.995), 0), (2, GeoPoint(0, -179.995), 0), (3, GeoPoint(0, 170), 0)])
    got = query_radius_time(idx, GeoPoint(0, 179.999), 2000.0, TimeInterval(0, 0))
    assert got == {1, 2}


def test_radius_query_near_pole():
    idx = build_st_index([(1, GeoPoint(89.999, 0), 0), (2, GeoPoint(89.999, 180), 0)])
    assert query_radius_time(idx, GeoPoint(89.999, 90), 1000.0, TimeInterval(0, 0)) == {1, 2}


@given(st.lists(st.tuples(st.floats(40, 40.05), st.floats(10, 10.05), st.integers(0, 1000)), max_size=60),
       st.floats(0, 5000), st.integers(0, 1000), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_radius_query_property(recs, radius, a, b):
    lo, hi = min(a, b), max(a, b)
    idx = build_st_index([(i, GeoPoint(la, ln), t) for i, (la, ln, t) in enumerate(recs)])
    c = GeoPoint(40.025, 10.025)
    expected = {i for i, (la, ln, t) in enumerate(recs)
                if lo <= t <= hi and haversine_m(c.lat, c.lon, la, ln) <= radius}
    assert query_radius_time(idx, c, radius, TimeInterval(lo, hi)) == expected


def test_index_build_is_deterministic(rng):
    ids, lat, lon, t = _random_records(rng, 2000)
    a, b = STIndex(ids, lat, lon, t), STIndex(ids, lat, lon, t)
    np.testing.assert_array_equal(a.ids, b.ids)
    np.testing.assert_array_equal(a.t, b.t)


@pytest.mark.slow
def test_radius_queries_faster_than_brute_force(rng):
    ids, lat, lon, t = _random_records(rng, 100_000)
    idx = STIndex(ids, lat, lon, t)
    queries = [(GeoPoint(rng.uniform(36, 44), rng.uniform(-4, 14)), TimeInterval(int(a), int(a) + 86400 * 3))
               for a in rng.integers(0, 27 * 86400, 50)]
    start = time.perf_counter()
    fast = [idx.radius_positions(c, 5000.0, w) for c, w in queries]
    t_index = time.perf_counter() - start
    start = time.perf_counter()
    slow = []
    for c, w in queries:
        d = haversine_array(c.lat, c.lon, lat, lon)
        slow.append(np.flatnonzero((d <= 5000.0) & (t >= w.start) & (t <= w.end)))
    t_brute = time.perf_counter() - start
    for f, s in zip(fast, slow):
        assert set(idx.ids[f].tolist()) == set(ids[s].tolist())
    assert t_index * 10 <= t_brute, (t_index, t_brute)
