import math

import pytest
from hypothesis import given, strategies as st

from uavmrta.avoidance import (EARTH_RADIUS_M, AvoidanceParams, GeoPoint, PeerTable, haversine_m, repulsion_speed,
                               repulsion_vector, separation)
from uavmrta.mesh import GpsBeacon

from oracles import law_of_cosines_m

PARAMS = AvoidanceParams(threshold_m=8.0, max_repulse_mps=3.0)
M_PER_DEG = math.pi * EARTH_RADIUS_M / 180.0


def test_haversine_identity_and_antipode():
    assert haversine_m(12.3, 45.6, 12.3, 45.6) == 0.0
    assert haversine_m(0.0, 0.0, 0.0, 180.0) == pytest.approx(math.pi * EARTH_RADIUS_M, rel=1e-12)


def test_haversine_millidegree():
    got = haversine_m(0.0, 0.0, 0.001, 0.0)
    want = law_of_cosines_m(0.0, 0.0, 0.001, 0.0)
    assert got == pytest.approx(111.19, abs=0.01)
    assert got == pytest.approx(want, abs=1e-6)


@given(st.floats(-80, 80), st.floats(-179, 179), st.floats(-80, 80), st.floats(-179, 179))
def test_haversine_matches_cosine_law_at_range(lat1, lon1, lat2, lon2):
    d = haversine_m(lat1, lon1, lat2, lon2)
    if d > 1000:
        assert d == pytest.approx(law_of_cosines_m(lat1, lon1, lat2, lon2), rel=1e-9)


def test_separation_cases():
    a = GeoPoint(10.0, 20.0, 3.0)
    assert separation(a, GeoPoint(10.0, 20.0, 8.0)) == pytest.approx(5.0, abs=1e-12)
    b = GeoPoint(10.0 + 3.0 / M_PER_DEG, 20.0, 7.0)
    assert separation(a, b) == pytest.approx(5.0, abs=1e-9)


def test_repulsion_speed_values():
    for d, want in ((0.0, 3.0), (4.0, 3.0 * math.sqrt(2) / 2), (8.0, 0.0), (16.0, 0.0)):
        assert abs(repulsion_speed(d, PARAMS) - want) <= 1e-12


@given(st.floats(0, 50), st.floats(0, 50))
def test_repulsion_speed_monotone(a, b):
    lo, hi = sorted((a, b))
    assert repulsion_speed(lo, PARAMS) >= repulsion_speed(hi, PARAMS)
    assert repulsion_speed(hi, PARAMS) >= 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        AvoidanceParams(threshold_m=0.0)
    p = AvoidanceParams.from_mapping({"threshold_m": 5, "max_repulse_mps": 2, "staleness_ms": 300, "x": 1})
    assert (p.threshold_m, p.max_repulse_mps, p.staleness_ms) == (5, 2, 300)


def test_no_peers_in_range():
    me = GeoPoint(0.0, 0.0, 10.0)
    assert repulsion_vector(me, [GeoPoint(1.0, 0.0, 10.0)], PARAMS) == (0.0, 0.0, 0.0)
    assert repulsion_vector(me, [], PARAMS) == (0.0, 0.0, 0.0)


def test_peer_due_north_pushes_south():
    me = GeoPoint(45.0, 7.0, 10.0)
    peer = GeoPoint(45.0 + 4.0 / M_PER_DEG, 7.0, 10.0)
    ve, vn, vu = repulsion_vector(me, [peer], PARAMS)
    assert abs(ve) < 1e-9 and abs(vu) < 1e-12
    assert vn == pytest.approx(-3.0 * math.sqrt(2) / 2, abs=1e-6)


def test_symmetric_peers_cancel():
    me = GeoPoint(0.0, 0.0, 10.0)
    dlon = 3.0 / M_PER_DEG
    ve, vn, _ = repulsion_vector(me, [GeoPoint(0.0, dlon, 10.0), GeoPoint(0.0, -dlon, 10.0)], PARAMS)
    assert abs(ve) < 1e-9 and abs(vn) < 1e-9


def test_coincident_peer_pushes_plus_x():
    me = GeoPoint(1.0, 1.0, 5.0)
    assert repulsion_vector(me, [GeoPoint(1.0, 1.0, 5.0)], PARAMS) == (3.0, 0.0, 0.0)


def test_vertical_only_push():
    ve, vn, vu = repulsion_vector(GeoPoint(1.0, 1.0, 5.0), [GeoPoint(1.0, 1.0, 1.0)], PARAMS)
    assert (ve, vn) == (0.0, 0.0)
    assert vu == pytest.approx(3.0 * math.sqrt(2) / 2, abs=1e-12)


def _beacon(rid, seq, ts, lat=0.0):
    return GpsBeacon(rid, seq, ts, lat, 0.0, 10.0)


def test_peer_table_rules():
    table = PeerTable()
    assert table.update(_beacon(2, 5, 1000), 1000)
    assert not table.update(_beacon(2, 5, 1000, lat=9.0), 1010)  # duplicate seq
    assert table.snapshot()[2].lat == 0.0
    assert not table.update(_beacon(2, 6, 900), 1020)  # older timestamp
    assert table.update(_beacon(2, 7, 1100), 1100)
    assert [t.seq for t in table.fresh(1500, 500)] == [7]
    assert table.fresh(1600, 500) == []
    assert table.drop_stale(1600, 500) == [2]
    assert table.snapshot() == {}


def test_stale_peer_contributes_nothing():
    table = PeerTable()
    table.update(_beacon(3, 0, 0), 0)
    me = GeoPoint(0.0, 0.0, 10.0)
    assert repulsion_vector(me, table.fresh(0, 500), PARAMS)[0] == 3.0
    assert repulsion_vector(me, table.fresh(501, 500), PARAMS) == (0.0, 0.0, 0.0)
