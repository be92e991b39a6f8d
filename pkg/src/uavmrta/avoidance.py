"""Inter-UAV repulsion computed from shared GPS positions."""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class AvoidanceParams:
    threshold_m: float = 8.0
    max_repulse_mps: float = 3.0
    earth_radius_m: float = EARTH_RADIUS_M
    staleness_ms: int = 500

    def __post_init__(self):
        if not (self.threshold_m > 0 and self.max_repulse_mps > 0):
            raise ValueError("avoidance threshold and max repulsive speed must be > 0")

    @classmethod
    def from_mapping(cls, data: dict | None) -> AvoidanceParams:
        data = data or {}
        kw = {k: data[k] for k in ("threshold_m", "max_repulse_mps", "earth_radius_m", "staleness_ms")
              if k in data}
        return cls(**kw)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float
    alt: float


@dataclass(frozen=True)
class PeerTrack:
    robot_id: int
    lat: float
    lon: float
    alt: float
    velocity: tuple[float, float, float]
    seq: int
    timestamp_ms: int
    arrival_ms: int

    def age_ms(self, now_ms: int) -> int:
        return now_ms - self.arrival_ms


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float,
                radius: float = EARTH_RADIUS_M) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * radius * math.asin(min(1.0, math.sqrt(a)))


def initial_bearing(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle bearing from point 1 to point 2, radians clockwise from north."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    y = math.sin(dl) * math.cos(p2)
    x = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)
    return math.atan2(y, x)


def separation(a, b, radius: float = EARTH_RADIUS_M) -> float:
    """3D distance between two tracks: haversine horizontal, altitude difference vertical."""
    d = haversine_m(a.lat, a.lon, b.lat, b.lon, radius)
    return math.sqrt(d * d + (b.alt - a.alt) ** 2)


def repulsion_speed(distance: float, params: AvoidanceParams) -> float:
    if distance < params.threshold_m:
        return params.max_repulse_mps * math.cos(math.pi * distance / (2.0 * params.threshold_m))
    return 0.0


def repulsion_vector(me, peers, params: AvoidanceParams) -> tuple[float, float, float]:
    """Sum of repulsive velocities pushing ``me`` away from every intruding peer.

    Components are (east, north, up) in m/s.  Callers pass fresh tracks only.
    """
    ve = vn = vu = 0.0
    for p in peers:
        d = haversine_m(p.lat, p.lon, me.lat, me.lon, params.earth_radius_m)
        dz = me.alt - p.alt
        D = math.sqrt(d * d + dz * dz)
        speed = repulsion_speed(D, params)
        if speed == 0.0:
            continue
        if D == 0.0:
            log.warning("coincident with peer %s; repelling along +x", getattr(p, "robot_id", "?"))
            ve += speed
            continue
        brg = initial_bearing(p.lat, p.lon, me.lat, me.lon)
        ve += speed * d * math.sin(brg) / D
        vn += speed * d * math.cos(brg) / D
        vu += speed * dz / D
    return ve, vn, vu


class PeerTable:
    """Latest beacon per peer.  One writer (the receive path), snapshot readers.

    A track takes part in repulsion only while its age is below the
    staleness timeout.
    """

    def __init__(self):
        self._tracks: dict[int, PeerTrack] = {}
        self._lock = threading.Lock()

    def update(self, beacon, arrival_ms: int) -> bool:
        """Apply a received beacon; returns False when it is a duplicate or older."""
        with self._lock:
            cur = self._tracks.get(beacon.robot_id)
            if cur is not None:
                if beacon.seq == cur.seq:
                    return False
                if beacon.timestamp_ms < cur.timestamp_ms:
                    return False
            self._tracks[beacon.robot_id] = PeerTrack(
                beacon.robot_id, beacon.lat_deg, beacon.lon_deg, beacon.alt_m,
                (beacon.vx, beacon.vy, beacon.vz), beacon.seq, beacon.timestamp_ms, arrival_ms)
            return True

    def snapshot(self) -> dict[int, PeerTrack]:
        with self._lock:
            return dict(self._tracks)

    def fresh(self, now_ms: int, staleness_ms: int) -> list[PeerTrack]:
        return [t for _, t in sorted(self.snapshot().items()) if t.age_ms(now_ms) < staleness_ms]

    def drop_stale(self, now_ms: int, staleness_ms: int) -> list[int]:
        with self._lock:
            gone = [k for k, t in self._tracks.items() if t.age_ms(now_ms) >= staleness_ms]
            for k in gone:
                del self._tracks[k]
        return sorted(gone)


__all__ = [
    "AvoidanceParams", "EARTH_RADIUS_M", "GeoPoint", "PeerTable", "PeerTrack", "haversine_m",
    "initial_bearing", "repulsion_speed", "repulsion_vector", "separation",
]
