"""Cascaded position -> velocity controller with saturated three-term laws.

Each axis law is ``f(k1*e + k2*integral(e) + k3*filtered_de/dt, cap, knee, offset)``
where ``f`` is the linear-then-flat saturation below.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

G = 9.81
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SaturationSpec:
    cap: float  # output magnitude
    scale: float  # input knee
    offset: float = 0.0

    def __post_init__(self):
        if not (self.cap > 0 and self.scale > 0):
            raise ValueError("saturation cap and scale must be > 0")


def saturate(s: float, spec: SaturationSpec) -> float:
    if abs(s) <= spec.scale:
        return spec.offset + spec.cap * (s / spec.scale)
    return spec.offset + math.copysign(spec.cap, s)


# --- target shape signatures --------------------------------------------------

@dataclass(frozen=True)
class CircleSignature:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("circle radius must be > 0")

    def distance(self, beta: float) -> float:
        return self.radius


class SampledSignature:
    """Centroid distance sampled at increasing angles in [0, 2*pi), linear between samples."""

    def __init__(self, angles: Sequence[float], distances: Sequence[float]):
        if len(angles) != len(distances) or len(angles) < 2:
            raise ValueError("need at least two (angle, distance) samples")
        if any(not d > 0 for d in distances):
            raise ValueError("signature distances must all be > 0")
        pairs = sorted((a % TWO_PI, d) for a, d in zip(angles, distances))
        self.angles = [a for a, _ in pairs]
        self.values = [d for _, d in pairs]

    @classmethod
    def from_function(cls, fn, n: int = 360) -> SampledSignature:
        angles = [TWO_PI * i / n for i in range(n)]
        return cls(angles, [fn(a) for a in angles])

    @classmethod
    def square(cls, half_side: float, n: int = 360) -> SampledSignature:
        """Axis-aligned square centred on the reference point."""
        def d(a):
            return half_side / max(abs(math.cos(a)), abs(math.sin(a)))
        return cls.from_function(d, n)

    def distance(self, beta: float) -> float:
        b = beta % TWO_PI
        angles, values = self.angles, self.values
        i = bisect.bisect_right(angles, b) - 1
        if i < 0:
            a0, v0 = angles[-1] - TWO_PI, values[-1]
            a1, v1 = angles[0], values[0]
        elif i == len(angles) - 1:
            a0, v0 = angles[i], values[i]
            a1, v1 = angles[0] + TWO_PI, values[0]
        else:
            a0, v0, a1, v1 = angles[i], values[i], angles[i + 1], values[i + 1]
        w = (b - a0) / (a1 - a0)
        return v0 + w * (v1 - v0)


def signature_distance(shape, beta: float) -> float:
    return shape.distance(beta)


def wrap_angle(a: float) -> float:
    return (a + math.pi) % TWO_PI - math.pi


def position_errors(pose: Sequence[float], centre: Sequence[float], shape, gamma: float = 0.0,
                    prev_beta: float = 0.0) -> tuple[float, float, float, float, float]:
    """Errors of a UAV at ``pose = (x, y, Z, yaw)`` against a shape around ``centre = (xc, yc, Zc)``.

    Returns ``(e_px, e_py, e_pz, beta, d_hat)`` where ``beta`` is the bearing
    of the UAV seen from the centre.  At the centre itself the bearing is
    undefined and ``prev_beta`` is reused.
    """
    x, y, z, yaw = pose
    xc, yc, zc = centre
    dx, dy = x - xc, y - yc
    d_hat = math.hypot(dx, dy)
    beta = math.atan2(dy, dx) if d_hat > 0 else prev_beta
    d_beta = shape.distance(beta)
    e_px = d_hat * math.cos(beta - yaw) * math.cos(gamma) - d_beta
    e_py = d_hat * math.sin(beta - yaw) * math.sin(gamma)
    e_pz = (zc - d_beta * math.sin(gamma)) - z
    return e_px, e_py, e_pz, beta, d_hat


# --- controllers ---------------------------------------------------------------

@dataclass
class AxisLaw:
    """One saturated three-term law with per-axis state."""

    gains: tuple[float, float, float]
    sat: SaturationSpec
    deriv_filter_ticks: float = 5.0
    integral: float = 0.0
    deriv: float = 0.0
    prev_error: float | None = None

    def update(self, error: float, dt: float) -> float:
        k1, k2, k3 = self.gains
        if self.prev_error is not None:
            self.integral += 0.5 * (error + self.prev_error) * dt
            raw = (error - self.prev_error) / dt
            alpha = 1.0 / (self.deriv_filter_ticks + 1.0)
            self.deriv += alpha * (raw - self.deriv)
        # anti-windup: the integral term alone never passes the knee
        if k2 != 0.0:
            lim = self.sat.scale / abs(k2)
            self.integral = min(max(self.integral, -lim), lim)
        self.prev_error = error
        return saturate(k1 * error + k2 * self.integral + k3 * self.deriv, self.sat)

    def reset(self):
        self.integral = 0.0
        self.deriv = 0.0
        self.prev_error = None


@dataclass(frozen=True)
class ControllerGains:
    kp: tuple[tuple[float, float, float], ...] = ((0.8, 0.02, 0.1),) * 3
    kv: tuple[tuple[float, float, float], ...] = ((0.5, 0.01, 0.05),) * 3
    max_theta: float = 0.3
    max_phi: float = 0.3
    max_az: float = 3.0
    max_speed: tuple[float, float, float] = (3.0, 3.0, 2.0)
    max_dist: tuple[float, float, float] = (5.0, 5.0, 3.0)
    g: float = G
    deriv_filter_ticks: float = 5.0

    def __post_init__(self):
        bounds = (self.max_theta, self.max_phi, self.max_az, *self.max_speed, *self.max_dist)
        if any(not b > 0 for b in bounds):
            raise ValueError("all controller bounds must be > 0")
        if any(not math.isfinite(k) for row in (*self.kp, *self.kv) for k in row):
            raise ValueError("controller gains must be finite")

    @classmethod
    def for_robot(cls, robot, control: dict | None = None) -> ControllerGains:
        control = control or {}
        kw = {
            "max_speed": tuple(robot.max_speed),
            "max_theta": robot.max_attitude[0],
            "max_phi": robot.max_attitude[1],
            "max_az": robot.max_attitude[2],
        }
        for key in ("kp", "kv"):
            if key in control:
                v = control[key]
                kw[key] = tuple(tuple(float(x) for x in row) for row in v) if isinstance(v[0], (list, tuple)) \
                    else (tuple(float(x) for x in v),) * 3
        if "max_dist" in control:
            kw["max_dist"] = tuple(float(x) for x in control["max_dist"])
        if "deriv_filter_ticks" in control:
            kw["deriv_filter_ticks"] = float(control["deriv_filter_ticks"])
        return cls(**kw)


@dataclass(frozen=True)
class CommandVector:
    theta: float
    phi: float
    psi: float
    az: float


@dataclass
class PositionController:
    gains: ControllerGains
    axes: list[AxisLaw] = field(init=False)

    def __post_init__(self):
        g = self.gains
        self.axes = [AxisLaw(g.kp[i], SaturationSpec(g.max_speed[i], g.max_dist[i]), g.deriv_filter_ticks)
                     for i in range(3)]

    def update(self, errors: Sequence[float], dt: float) -> tuple[float, float, float]:
        return tuple(ax.update(e, dt) for ax, e in zip(self.axes, errors))  # type: ignore[return-value]

    def reset(self):
        for ax in self.axes:
            ax.reset()


@dataclass
class VelocityController:
    gains: ControllerGains
    axes: list[AxisLaw] = field(init=False)

    def __post_init__(self):
        g = self.gains
        caps = (g.max_theta, g.max_phi, g.max_az)
        offsets = (0.0, 0.0, g.g)
        self.axes = [AxisLaw(g.kv[i], SaturationSpec(caps[i], g.max_speed[i], offsets[i]), g.deriv_filter_ticks)
                     for i in range(3)]

    def update(self, errors: Sequence[float], dt: float, yaw_cmd: float) -> CommandVector:
        theta = self.axes[0].update(errors[0], dt)
        phi = self.axes[1].update(errors[1], dt)
        az = self.axes[2].update(errors[2], dt)
        return CommandVector(theta, phi, yaw_cmd, az)

    def reset(self):
        for ax in self.axes:
            ax.reset()
