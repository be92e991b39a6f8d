"""Deterministic fixed-timestep execution of a planned mission.

Frames: world x points east, y north, z up (metres from a local origin).
Each UAV runs the cascaded controller against its current target, adds
the repulsive velocity from fresh peer beacons, and integrates a
first-order attitude response followed by point-mass kinematics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

from .allocation import AllocationSolution, route_nodes
from .avoidance import EARTH_RADIUS_M, AvoidanceParams, GeoPoint, PeerTable, repulsion_vector
from .control import (CircleSignature, ControllerGains, PositionController, VelocityController,
                      position_errors, wrap_angle)
from .grid import CostTensor
from .mesh import LoopbackBus, MeshConfig, MeshNode
from .mission import MissionSpec, Task

GROUNDED, TAKEOFF, TRANSIT, MEASURING, RETURNING, LANDED = (
    "Grounded", "Takeoff", "Transit", "Measuring", "Returning", "Landed")


class SimulationAbort(RuntimeError):
    """A non-finite state appeared; ``dump`` holds the offending UAV state."""

    def __init__(self, message: str, dump: dict):
        super().__init__(message)
        self.dump = dump


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.02
    takeoff_duration_s: float = 50.0
    dwell_s: float = 5.0
    # energy: dE/dt = idle_rate + speed_rate * |v| (+ takeoff_rate while taking off)
    idle_rate: float = 0.02
    speed_rate: float = 0.1933
    takeoff_rate: float = 1.0
    battery_capacity_eu: float = 400.0
    origin_lat: float = 49.0
    origin_lon: float = 0.5
    max_duration_s: float = 3600.0
    cruise_alt_m: float = 10.0
    alt_stagger_m: float = 2.0
    site_radius_m: float = 1.0
    pad_radius_m: float = 5.0
    arrival_tol_m: float = 0.5
    attitude_tau_s: float = 0.1
    yaw_tau_s: float = 0.3
    vel_filter_ticks: float = 2.0
    telemetry_period_s: float = 0.1
    beacon_period_ms: int = 100
    land_alt_m: float = 0.05

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if min(self.idle_rate, self.speed_rate, self.takeoff_rate) < 0:
            raise ValueError("energy rates must be >= 0")

    @classmethod
    def from_mapping(cls, data: dict | None, **overrides) -> SimConfig:
        known = {f.name for f in fields(cls)}
        kw = {k: v for k, v in (data or {}).items() if k in known}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


@dataclass
class TelemetryRecord:
    t: float
    robot: int
    x: float
    y: float
    z: float
    battery_pct: float
    cum_energy: float
    cum_cost: float
    event: str = ""


TELEMETRY_FIELDS = ("t", "robot", "x", "y", "z", "battery_pct", "cum_energy", "cum_cost", "event")


@dataclass
class Waypoint:
    site: int
    x: float
    y: float
    tasks: tuple[Task, ...] = ()
    leg_cost: float = 0.0  # planned cost of the leg ending here


class LocalFrame:
    """Local tangent plane at a fixed origin, used to publish lat/lon in beacons."""

    def __init__(self, lat0: float, lon0: float, radius: float = EARTH_RADIUS_M):
        self.lat0, self.lon0, self.radius = lat0, lon0, radius
        self._k_lon = math.degrees(1.0 / (radius * math.cos(math.radians(lat0))))
        self._k_lat = math.degrees(1.0 / radius)

    def to_geo(self, x: float, y: float) -> tuple[float, float]:
        return self.lat0 + y * self._k_lat, self.lon0 + x * self._k_lon

    def to_local(self, lat: float, lon: float) -> tuple[float, float]:
        return (lon - self.lon0) / self._k_lon, (lat - self.lat0) / self._k_lat


class Uav:
    def __init__(self, robot_id: int, gains: ControllerGains, config: SimConfig,
                 start: Sequence[float], home: Sequence[float], plan: Sequence[Waypoint],
                 cruise_alt: float, home_radius: float, home_site: int = 1,
                 home_leg_cost: float = 0.0, airborne: bool = False):
        self.id = robot_id
        self.gains = gains
        self.cfg = config
        self.pos = [float(v) for v in start]
        self.vel = [0.0, 0.0, 0.0]
        self.vel_hat = [0.0, 0.0, 0.0]
        self.theta = self.phi = 0.0
        self.psi = 0.0
        self.az = gains.g
        self.energy = 0.0
        self.battery = 100.0
        self.power = 0.0
        self.plan = list(plan)
        self.home = (float(home[0]), float(home[1]))
        self.home_radius = home_radius
        self.home_site = home_site
        self.home_leg_cost = home_leg_cost
        self.cruise_alt = cruise_alt
        self.node = 0
        self.cum_cost = 0.0
        self.pos_ctl = PositionController(gains)
        self.vel_ctl = VelocityController(gains)
        self.peers = PeerTable()
        self.mesh: MeshNode | None = None
        self.beta = 0.0
        self.phase = GROUNDED
        self.hold: tuple[float, float, float] | None = None
        self.target_key = None
        self.launch_t: float | None = None
        self.land_t: float | None = None
        self.dwell_left = 0.0
        self.task_idx = 0
        self.landing = False
        self.breach = False
        self.events: list[str] = []
        self.last_cmd = None
        self.last_errors = (0.0, 0.0, 0.0)
        self.last_vref = (0.0, 0.0, 0.0)
        if airborne:
            self.pos[2] = cruise_alt
            self.launch_t = 0.0
            self.power = self.cfg.idle_rate
            self._begin_leg()

    @property
    def airborne(self) -> bool:
        return self.phase in (TAKEOFF, TRANSIT, MEASURING, RETURNING)

    def launch(self, t: float):
        self.phase = TAKEOFF
        self.launch_t = t
        self.power = self.cfg.idle_rate + self.cfg.takeoff_rate
        self.hold = (self.pos[0], self.pos[1], self.cruise_alt)
        self.events.append("takeoff")

    def _begin_leg(self):
        if self.node < len(self.plan):
            self.phase = TRANSIT
        else:
            self.phase = RETURNING
            self.landing = False
        self.hold = None

    def _target(self):
        """Current target as (kind, centre/point, radius)."""
        if self.hold is not None:
            return "hold", self.hold, 0.0
        if self.phase in (TRANSIT, MEASURING):
            wp = self.plan[self.node]
            return "site", (wp.x, wp.y, self.cruise_alt), self.cfg.site_radius_m
        return "site", (self.home[0], self.home[1], self.cruise_alt), self.home_radius

    # -- one control + plant tick
    def tick(self, t: float, dt: float, now_ms: int, avoid: AvoidanceParams, frame: LocalFrame):
        if not self.airborne:
            return
        if self.mesh is not None:
            for arrival, b in self.mesh.receive(now_ms):
                self.peers.update(b, arrival)

        kind, centre, radius = self._target()
        key = (kind, centre, radius)
        if key != self.target_key:
            self.pos_ctl.reset()
            self.target_key = key
        x, y, z = self.pos
        if kind == "hold":
            errs = (centre[0] - x, centre[1] - y, centre[2] - z)
            vx, vy, vz = self.pos_ctl.update(errs, dt)
            yaw_cmd = self.psi
            horiz_err = math.hypot(errs[0], errs[1])
            self.last_errors = errs
        else:
            e_px, e_py, e_pz, beta, d_hat = position_errors(
                (x, y, z, self.psi), centre, CircleSignature(radius), 0.0, self.beta)
            self.beta = beta
            vr, vt, vz = self.pos_ctl.update((e_px, e_py, e_pz), dt)
            cb, sb = math.cos(beta), math.sin(beta)
            # radial axis points from the UAV towards the centre, tangential is its left normal
            vx = -vr * cb + vt * sb
            vy = -vr * sb - vt * cb
            yaw_cmd = beta
            horiz_err = abs(d_hat - radius)
            self.last_errors = (e_px, e_py, e_pz)

        lat, lon = frame.to_geo(x, y)
        rv = repulsion_vector(GeoPoint(lat, lon, z), self.peers.fresh(now_ms, avoid.staleness_ms), avoid)
        vmax = self.gains.max_speed
        vref = (min(max(vx + rv[0], -vmax[0]), vmax[0]),
                min(max(vy + rv[1], -vmax[1]), vmax[1]),
                min(max(vz + rv[2], -vmax[2]), vmax[2]))
        self.last_vref = vref

        # velocity errors in the body frame: forward along yaw, lateral positive to the right
        ex = vref[0] - self.vel_hat[0]
        ey = vref[1] - self.vel_hat[1]
        ez = vref[2] - self.vel_hat[2]
        cp, sp = math.cos(self.psi), math.sin(self.psi)
        e_fwd = ex * cp + ey * sp
        e_right = ex * sp - ey * cp
        cmd = self.vel_ctl.update((e_fwd, e_right, ez), dt, yaw_cmd)
        self.last_cmd = cmd

        # plant: first-order attitude lag, then point-mass kinematics
        a_att = 1.0 - math.exp(-dt / self.cfg.attitude_tau_s)
        a_yaw = 1.0 - math.exp(-dt / self.cfg.yaw_tau_s)
        self.theta += a_att * (cmd.theta - self.theta)
        self.phi += a_att * (cmd.phi - self.phi)
        self.psi = wrap_angle(self.psi + a_yaw * wrap_angle(cmd.psi - self.psi))
        self.az = cmd.az
        g = self.gains.g
        a_fwd = g * math.tan(self.theta)
        a_left = -g * math.tan(self.phi)
        cp, sp = math.cos(self.psi), math.sin(self.psi)
        ax = a_fwd * cp - a_left * sp
        ay = a_fwd * sp + a_left * cp
        azz = self.az - g
        v = self.vel
        v[0] += ax * dt
        v[1] += ay * dt
        v[2] += azz * dt
        p = self.pos
        p[0] += v[0] * dt
        p[1] += v[1] * dt
        p[2] += v[2] * dt
        if p[2] < 0.0:
            p[2] = 0.0
            v[2] = max(v[2], 0.0)
        k = 1.0 / (self.cfg.vel_filter_ticks + 1.0)
        for i in range(3):
            self.vel_hat[i] += k * (v[i] - self.vel_hat[i])
        if not all(math.isfinite(q) for q in (*p, *v, self.theta, self.phi, self.psi)):
            raise SimulationAbort(f"non-finite state for UAV {self.id} at t={t:.3f}", self.dump(t))

        # energy (trapezoidal in power)
        speed = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        power = self.cfg.idle_rate + self.cfg.speed_rate * speed
        if self.phase == TAKEOFF:
            power += self.cfg.takeoff_rate
        self.energy += 0.5 * (self.power + power) * dt
        self.power = power
        self.battery = max(0.0, 100.0 * (1.0 - self.energy / self.cfg.battery_capacity_eu))

        self._advance_mission(t + dt, horiz_err)
        if self.battery <= 0.0 and self.airborne:
            self.phase = LANDED
            self.land_t = t + dt
            self.breach = True
            self.events.append("battery_exhausted")

    def _advance_mission(self, t: float, horiz_err: float):
        tol = self.cfg.arrival_tol_m
        if self.phase == TAKEOFF:
            if t - self.launch_t >= self.cfg.takeoff_duration_s - 1e-9:
                self._begin_leg()
        elif self.phase == TRANSIT:
            if horiz_err < tol:
                wp = self.plan[self.node]
                self.cum_cost += wp.leg_cost
                self.events.append(f"site_arrival:{wp.site}")
                self.phase = MEASURING
                self.task_idx = 0
                self.dwell_left = self.cfg.dwell_s
                if not wp.tasks:
                    self._next_node()
        elif self.phase == MEASURING:
            self.dwell_left -= self.cfg.dt
            if self.dwell_left <= 1e-9:
                wp = self.plan[self.node]
                task = wp.tasks[self.task_idx]
                self.events.append(f"task_done:{task.site_id}:{task.measurement_id}")
                self.task_idx += 1
                if self.task_idx < len(wp.tasks):
                    self.dwell_left += self.cfg.dwell_s
                else:
                    self._next_node()
        elif self.phase == RETURNING:
            if not self.landing and horiz_err < tol:
                self.cum_cost += self.home_leg_cost
                self.events.append(f"site_arrival:{self.home_site}")
                self.landing = True
                self.hold = (self.pos[0], self.pos[1], 0.0)
            elif self.landing and self.pos[2] <= self.cfg.land_alt_m:
                self.phase = LANDED
                self.land_t = t
                self.pos[2] = 0.0
                self.vel = [0.0, 0.0, 0.0]
                self.events.append("landing")

    def _next_node(self):
        self.node += 1
        self._begin_leg()

    def dump(self, t: float) -> dict:
        return {"t": t, "robot": self.id, "phase": self.phase, "pos": list(self.pos),
                "vel": list(self.vel), "attitude": [self.theta, self.phi, self.psi],
                "az": self.az, "energy": self.energy, "vref": list(self.last_vref)}

    def record(self, t: float, event: str = "") -> TelemetryRecord:
        return TelemetryRecord(t, self.id, self.pos[0], self.pos[1], self.pos[2],
                               self.battery, self.energy, self.cum_cost, event)


class World:
    """All UAVs plus the beacon medium, stepped in robot-id order."""

    def __init__(self, uavs: Sequence[Uav], config: SimConfig, avoidance: AvoidanceParams = AvoidanceParams(),
                 mesh: MeshConfig | None = None, bus: LoopbackBus | None = None):
        self.uavs = sorted(uavs, key=lambda u: u.id)
        self.cfg = config
        self.avoid = avoidance
        self.frame = LocalFrame(config.origin_lat, config.origin_lon, avoidance.earth_radius_m)
        self.mesh_cfg = mesh or MeshConfig(period_ms=config.beacon_period_ms)
        self.bus = bus if bus is not None else (LoopbackBus() if self.mesh_cfg.transport == "loopback" else None)
        self.tick_count = 0
        self.telemetry: list[TelemetryRecord] = []
        self._tele_every = max(1, round(config.telemetry_period_s / config.dt))
        for u in self.uavs:
            u.mesh = MeshNode(self.mesh_cfg, u.id, self.bus, clock_ms=self._now_ms)
            self.telemetry.append(u.record(0.0, "takeoff" if u.events[-1:] == ["takeoff"] else ""))
            u.events.clear()

    @property
    def t(self) -> float:
        return self.tick_count * self.cfg.dt

    def _now_ms(self) -> int:
        # udp arrivals are stamped in simulated time so staleness stays meaningful
        return round(self.t * 1000)

    def step(self) -> None:
        dt = self.cfg.dt
        t = self.t
        now_ms = round(t * 1000)
        self.tick_count += 1
        t_next = self.t
        sample = self.tick_count % self._tele_every == 0
        for u in self.uavs:
            if not u.airborne:
                continue
            u.tick(t, dt, now_ms, self.avoid, self.frame)
            if u.airborne and u.mesh.due(now_ms):
                lat, lon = self.frame.to_geo(u.pos[0], u.pos[1])
                u.mesh.send(u.mesh.next_beacon(now_ms, lat, lon, u.pos[2], *u.vel), now_ms)
            if u.events:
                for ev in u.events:
                    self.telemetry.append(u.record(t_next, ev))
                u.events.clear()
            elif sample:
                self.telemetry.append(u.record(t_next))

    def done(self) -> bool:
        return not any(u.airborne for u in self.uavs)

    def run(self, max_duration_s: float | None = None) -> None:
        limit = self.cfg.max_duration_s if max_duration_s is None else max_duration_s
        max_ticks = round(limit / self.cfg.dt)
        while not self.done() and self.tick_count < max_ticks:
            self.step()

    def close(self):
        for u in self.uavs:
            if u.mesh is not None:
                u.mesh.close()


@dataclass
class RobotSummary:
    robot: int
    flew: bool
    planned_cost: float
    flight_time_s: float
    energy: float
    battery_pct: float
    arrivals: int
    completed: bool
    budget_breach: bool


@dataclass
class SimResult:
    telemetry: list[TelemetryRecord]
    robots: list[RobotSummary] = field(default_factory=list)
    duration_s: float = 0.0

    @property
    def budget_breach(self) -> bool:
        return any(r.budget_breach for r in self.robots)


def pad_position(spec: MissionSpec, robot_id: int, config: SimConfig) -> tuple[float, float]:
    cx, cy = spec.grid.cell_centre_m(spec.depot.cell)
    n = len(spec.robots)
    ang = 2.0 * math.pi * (robot_id - 1) / max(n, 1)
    return cx + config.pad_radius_m * math.cos(ang), cy + config.pad_radius_m * math.sin(ang)


def build_world(spec: MissionSpec, solution: AllocationSolution, tensor: CostTensor,
                config: SimConfig, avoidance: AvoidanceParams | None = None,
                mesh: MeshConfig | None = None) -> World:
    avoidance = avoidance or AvoidanceParams.from_mapping(spec.settings.get("avoidance"))
    control = spec.settings.get("control")
    depot = spec.depot
    depot_xy = spec.grid.cell_centre_m(depot.cell)
    uavs = []
    for robot in sorted(spec.robots, key=lambda r: r.id):
        nodes = route_nodes(solution, robot.id)
        plan = []
        prev = depot.id
        for site_id, genes in nodes:
            sx, sy = spec.grid.cell_centre_m(spec.site(site_id).cell)
            plan.append(Waypoint(site_id, sx, sy, tuple(g.task for g in genes),
                                 tensor.cost(prev, site_id, robot.id)))
            prev = site_id
        home_cost = tensor.cost(prev, depot.id, robot.id) if nodes else 0.0
        pad = pad_position(spec, robot.id, config)
        u = Uav(robot.id, ControllerGains.for_robot(robot, control), config,
                (pad[0], pad[1], 0.0), depot_xy, plan,
                config.cruise_alt_m + config.alt_stagger_m * (robot.id - 1),
                home_radius=config.pad_radius_m, home_site=depot.id, home_leg_cost=home_cost)
        if plan:
            u.launch(0.0)
        uavs.append(u)
    return World(uavs, config, avoidance, mesh)


def run_mission(spec: MissionSpec, solution: AllocationSolution, tensor: CostTensor,
                config: SimConfig | None = None, avoidance: AvoidanceParams | None = None,
                mesh: MeshConfig | None = None) -> SimResult:
    """Fly every robot with a non-empty route: takeoff, visit, dwell, return, land."""
    config = config or SimConfig.from_mapping(spec.settings.get("sim"))
    world = build_world(spec, solution, tensor, config, avoidance, mesh)
    try:
        world.run()
    finally:
        world.close()
    result = SimResult(world.telemetry, duration_s=world.t)
    for u in world.uavs:
        flew = u.launch_t is not None
        end = u.land_t if u.land_t is not None else world.t
        planned = sum(w.leg_cost for w in u.plan) + u.home_leg_cost
        arrivals = sum(1 for r in world.telemetry if r.robot == u.id and r.event.startswith("site_arrival"))
        result.robots.append(RobotSummary(
            u.id, flew, planned if flew else 0.0, (end - u.launch_t) if flew else 0.0,
            u.energy, u.battery, arrivals, u.phase == LANDED and not u.breach if flew else True,
            u.breach))
    return result


def write_telemetry_csv(records: Sequence[TelemetryRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TELEMETRY_FIELDS)
        for r in records:
            w.writerow([f"{r.t:.3f}", r.robot, f"{r.x:.4f}", f"{r.y:.4f}", f"{r.z:.4f}",
                        f"{r.battery_pct:.5f}", f"{r.cum_energy:.6f}", f"{r.cum_cost:g}", r.event])


def read_telemetry_csv(path: str | Path) -> list[TelemetryRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(TelemetryRecord(float(row["t"]), int(row["robot"]), float(row["x"]), float(row["y"]),
                                       float(row["z"]), float(row["battery_pct"]), float(row["cum_energy"]),
                                       float(row["cum_cost"]), row["event"]))
    return out
