"""2-DoF differential gear-train kinematics and a rate-limited servo model.

Two side-by-side motors drive sun gears that a planet gear sums/differences
into rotations of the marker holder about two perpendicular axes: lateral
(x, angle theta_p) and longitudinal (y, angle theta_c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import rotation_x, rotation_y


class GimbalDegeneracy(ValueError):
    """Target direction lies on the lateral-axis singularity."""


@dataclass(frozen=True)
class GearParams:
    """Gear ratios: motor gear to sun gear (n_a, n_b), sun gear to planet gear (n_s)."""

    n_a: float = 0.5
    n_b: float = 0.5
    n_s: float = 0.5

    def __post_init__(self):
        if self.n_a <= 0 or self.n_b <= 0 or self.n_s <= 0:
            raise ValueError("gear ratios must be strictly positive")


@dataclass(frozen=True)
class MarkerDeltas:
    """Rotation increments of the marker: lateral axis (p) and longitudinal axis (c), rad."""

    d_theta_p: float
    d_theta_c: float

    def __post_init__(self):
        if not (math.isfinite(self.d_theta_p) and math.isfinite(self.d_theta_c)):
            raise ValueError("marker deltas must be finite")


@dataclass(frozen=True)
class MotorDeltas:
    """Rotation increments of the two drive motors, rad."""

    d_theta_a: float
    d_theta_b: float

    def __post_init__(self):
        if not (math.isfinite(self.d_theta_a) and math.isfinite(self.d_theta_b)):
            raise ValueError("motor deltas must be finite")


@dataclass(frozen=True)
class ServoState:
    """Current motor angles plus the slew/range limits of the servos."""

    angle_a: float = 0.0
    angle_b: float = 0.0
    rate_limit: float = 6.0  # rad/s
    range: float = math.pi / 2  # symmetric, +/- rad

    def __post_init__(self):
        if self.rate_limit <= 0:
            raise ValueError("rate_limit must be positive")
        if abs(self.angle_a) > self.range or abs(self.angle_b) > self.range:
            raise ValueError("servo angle outside range")


def motor_deltas(m: MarkerDeltas, g: GearParams = GearParams()) -> MotorDeltas:
    """Motor rotations required for the requested marker rotations."""
    return MotorDeltas(
        d_theta_a=g.n_a * (g.n_s * m.d_theta_p + m.d_theta_c),
        d_theta_b=g.n_b * (g.n_s * m.d_theta_p - m.d_theta_c),
    )


def marker_deltas(m: MotorDeltas, g: GearParams = GearParams()) -> MarkerDeltas:
    """Marker rotations produced by the given motor rotations (exact inverse)."""
    a = m.d_theta_a / g.n_a
    b = m.d_theta_b / g.n_b
    return MarkerDeltas(d_theta_p=(a + b) / (2.0 * g.n_s), d_theta_c=(a - b) / 2.0)


def correction_angles(marker_normal_target) -> MarkerDeltas:
    """Gimbal angles carrying the rest normal (0,0,1) onto the target direction.

    Rotation order is lateral (x) first, then longitudinal (y); with that
    order the closed form is theta_p = -asin(d_y), theta_c = atan2(d_x, d_z).
    Directions within 1e-9 of +/-y are unreachable (singularity).
    """
    d = np.asarray(marker_normal_target, dtype=float).reshape(3)
    n = float(np.linalg.norm(d))
    if abs(n - 1.0) > 1e-9:
        raise ValueError("target direction must be a unit vector")
    if abs(d[1]) >= 1.0 - 1e-9:
        raise GimbalDegeneracy("target along the lateral axis is unreachable")
    return MarkerDeltas(
        d_theta_p=-math.asin(d[1]),
        d_theta_c=math.atan2(d[0], d[2]),
    )


def marker_rotation(m: MarkerDeltas) -> np.ndarray:
    """Forward map of the gimbal: R = Ry(theta_c) @ Rx(theta_p)."""
    return rotation_y(m.d_theta_c) @ rotation_x(m.d_theta_p)


def _slew(current: float, target: float, max_step: float, limit: float) -> float:
    delta = target - current
    if abs(delta) > max_step:
        delta = math.copysign(max_step, delta)
    return min(max(current + delta, -limit), limit)


def servo_step(s: ServoState, command: MotorDeltas, dt: float) -> ServoState:
    """Advance servo angles toward the commanded targets, respecting rate and range."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    # Commanded targets are clamped to range first so the servo never chases
    # an unreachable angle.
    target_a = min(max(command.d_theta_a, -s.range), s.range)
    target_b = min(max(command.d_theta_b, -s.range), s.range)
    step = s.rate_limit * dt
    return ServoState(
        angle_a=_slew(s.angle_a, target_a, step, s.range),
        angle_b=_slew(s.angle_b, target_b, step, s.range),
        rate_limit=s.rate_limit,
        range=s.range,
    )
