"""GPS beacon wire format and peer-to-peer transports (UDP multicast, in-process loopback)."""

from __future__ import annotations

import logging
import os
import queue
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

log = logging.getLogger(__name__)

MAGIC = b"GPSM"
VERSION = 1
# magic, version, robot_id, seq, timestamp_ms, lat, lon, alt, vx, vy, vz
_FMT = struct.Struct("<4sBBIQdddfff")
FRAME_SIZE = _FMT.size

DEFAULT_GROUP = "239.0.0.77"
DEFAULT_PORT = 40077
DEFAULT_PERIOD_MS = 100


class BeaconDecodeError(ValueError):
    pass


class ShortBufferError(BeaconDecodeError):
    pass


class FrameLengthError(BeaconDecodeError):
    pass


class BadMagicError(BeaconDecodeError):
    pass


class UnknownVersionError(BeaconDecodeError):
    pass


def _f32(v: float) -> float:
    return struct.unpack("<f", struct.pack("<f", v))[0]


@dataclass(frozen=True)
class GpsBeacon:
    robot_id: int
    seq: int
    timestamp_ms: int
    lat_deg: float
    lon_deg: float
    alt_m: float
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0

    def __post_init__(self):
        # velocities travel as float32; store them that way so decode(encode(b)) == b
        for name in ("vx", "vy", "vz"):
            object.__setattr__(self, name, _f32(float(getattr(self, name))))


def encode(b: GpsBeacon) -> bytes:
    return _FMT.pack(MAGIC, VERSION, b.robot_id, b.seq, b.timestamp_ms,
                     b.lat_deg, b.lon_deg, b.alt_m, b.vx, b.vy, b.vz)


def decode(buf: bytes) -> GpsBeacon:
    if len(buf) < FRAME_SIZE:
        raise ShortBufferError(f"short buffer: {len(buf)} < {FRAME_SIZE} bytes")
    if len(buf) > FRAME_SIZE:
        raise FrameLengthError(f"frame length {len(buf)} != {FRAME_SIZE} bytes")
    magic, version, rid, seq, ts, lat, lon, alt, vx, vy, vz = _FMT.unpack(buf)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnknownVersionError(f"unknown version {version}")
    return GpsBeacon(rid, seq, ts, lat, lon, alt, vx, vy, vz)


@dataclass(frozen=True)
class MeshConfig:
    group: str = DEFAULT_GROUP
    port: int = DEFAULT_PORT
    period_ms: int = DEFAULT_PERIOD_MS
    transport: str = "loopback"  # or "udp"

    def __post_init__(self):
        if self.period_ms <= 0:
            raise ValueError("beacon period must be > 0")
        if self.transport not in ("loopback", "udp"):
            raise ValueError("transport must be 'loopback' or 'udp'")

    @classmethod
    def from_env(cls, **kw) -> MeshConfig:
        if "PF_MESH_GROUP" in os.environ:
            kw.setdefault("group", os.environ["PF_MESH_GROUP"])
        if "PF_MESH_PORT" in os.environ:
            kw.setdefault("port", int(os.environ["PF_MESH_PORT"]))
        return cls(**kw)


# --- transports -----------------------------------------------------------------

class LoopbackBus:
    """Deterministic in-process broadcast medium.

    ``latency_ms`` delays every delivery; ``drop(sender, seq, receiver)``
    returning True loses that copy.  Deliveries are held until the
    receiver drains at or after their arrival time.
    """

    def __init__(self, latency_ms: int = 0, drop: Callable[[int, int, int], bool] | None = None):
        self.latency_ms = latency_ms
        self.drop = drop
        self._inboxes: dict[int, deque] = {}
        self._lock = threading.Lock()

    def attach(self, robot_id: int) -> None:
        with self._lock:
            self._inboxes.setdefault(robot_id, deque())

    def detach(self, robot_id: int) -> None:
        with self._lock:
            self._inboxes.pop(robot_id, None)

    def broadcast(self, sender: int, frame: bytes, seq: int, now_ms: int) -> None:
        with self._lock:
            for rid in sorted(self._inboxes):
                if rid == sender:
                    continue
                if self.drop is not None and self.drop(sender, seq, rid):
                    continue
                self._inboxes[rid].append((now_ms + self.latency_ms, frame))

    def take(self, robot_id: int, now_ms: int) -> list[tuple[int, bytes]]:
        with self._lock:
            box = self._inboxes.get(robot_id)
            if not box:
                return []
            out = []
            keep = deque()
            for arrival, frame in box:
                (out if arrival <= now_ms else keep).append((arrival, frame))
            self._inboxes[robot_id] = keep
            return out


class MeshNode:
    """One UAV's endpoint: send own beacons, drain received peer beacons."""

    def __init__(self, config: MeshConfig, robot_id: int, bus: LoopbackBus | None = None,
                 clock_ms: Callable[[], int] | None = None):
        self.config = config
        self.robot_id = robot_id
        self.sent = 0
        self._last_sent_ms: int | None = None
        self._seq = 0
        self._clock = clock_ms or (lambda: int(time.monotonic() * 1000))
        self._bus = None
        self._sock_tx = self._sock_rx = None
        self._rx_queue: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        if config.transport == "loopback":
            if bus is None:
                raise ValueError("loopback transport needs a LoopbackBus")
            self._bus = bus
            bus.attach(robot_id)
        else:
            self._open_udp()

    # -- udp plumbing
    def _open_udp(self):
        cfg = self.config
        rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
        rx.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        if hasattr(socket, "SO_REUSEPORT"):
            rx.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEPORT, 1)
        rx.bind(("", cfg.port))
        mreq = struct.pack("4s4s", socket.inet_aton(cfg.group), socket.inet_aton("0.0.0.0"))
        rx.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, mreq)
        rx.settimeout(0.2)
        tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
        tx.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_TTL, 1)
        tx.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1)
        tx.setblocking(False)
        self._sock_rx, self._sock_tx = rx, tx
        t = threading.Thread(target=self._rx_loop, name=f"mesh-rx-{self.robot_id}", daemon=True)
        t.start()
        self._threads.append(t)

    def _rx_loop(self):
        while not self._stop.is_set():
            try:
                data, _ = self._sock_rx.recvfrom(2048)
            except socket.timeout:
                continue
            except OSError as exc:
                if self._stop.is_set():
                    return
                log.warning("mesh receive error on node %d: %s", self.robot_id, exc)
                continue
            self._rx_queue.put((self._clock(), data))

    # -- public surface
    def next_beacon(self, timestamp_ms: int, lat: float, lon: float, alt: float,
                    vx: float = 0.0, vy: float = 0.0, vz: float = 0.0) -> GpsBeacon:
        b = GpsBeacon(self.robot_id, self._seq, timestamp_ms, lat, lon, alt, vx, vy, vz)
        self._seq += 1
        return b

    def send(self, beacon: GpsBeacon, now_ms: int | None = None) -> None:
        frame = encode(beacon)
        now_ms = self._clock() if now_ms is None else now_ms
        if self._bus is not None:
            self._bus.broadcast(self.robot_id, frame, beacon.seq, now_ms)
        else:
            try:
                self._sock_tx.sendto(frame, (self.config.group, self.config.port))
            except OSError as exc:
                log.warning("mesh send failed on node %d: %s", self.robot_id, exc)
        self.sent += 1
        self._last_sent_ms = now_ms

    def due(self, now_ms: int) -> bool:
        return self._last_sent_ms is None or now_ms - self._last_sent_ms >= self.config.period_ms

    def receive(self, now_ms: int | None = None) -> list[tuple[int, GpsBeacon]]:
        """Drain pending frames as (arrival_ms, beacon); own and malformed frames are skipped."""
        now_ms = self._clock() if now_ms is None else now_ms
        if self._bus is not None:
            raw = self._bus.take(self.robot_id, now_ms)
        else:
            raw = []
            while True:
                try:
                    raw.append(self._rx_queue.get_nowait())
                except queue.Empty:
                    break
        out = []
        for arrival, frame in raw:
            try:
                b = decode(frame)
            except BeaconDecodeError as exc:
                log.warning("dropping frame on node %d: %s", self.robot_id, exc)
                continue
            if b.robot_id != self.robot_id:
                out.append((arrival, b))
        return out

    def start_periodic(self, make_beacon: Callable[[int], GpsBeacon]) -> None:
        """Send ``make_beacon(now_ms)`` every period on a background thread (real-time use)."""
        def loop():
            while not self._stop.wait(self.config.period_ms / 1000.0):
                now = self._clock()
                self.send(make_beacon(now), now)
        t = threading.Thread(target=loop, name=f"mesh-tx-{self.robot_id}", daemon=True)
        t.start()
        self._threads.append(t)

    def close(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=1.0)
        if self._bus is not None:
            self._bus.detach(self.robot_id)
        for s in (self._sock_rx, self._sock_tx):
            if s is not None:
                s.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def mesh_node(config: MeshConfig, identity: int, bus: LoopbackBus | None = None, **kw) -> MeshNode:
    return MeshNode(config, identity, bus, **kw)

