"""Distance-zone guidance/halt state machine, direction selection, speed bound.

Zones on the hand-to-TCP distance: below the critical threshold the robot
halts; between critical and activation a guidance pattern is rendered; the
robot resumes once the hand clears the critical threshold (plus optional
hysteresis).

Direction vectors live in the user workspace frame: Right = +x, Left = -x,
Down = -z, Back = -y.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Point3
from .haptics import PatternId, pattern_duration

PREDICTION_HORIZON_S = 0.5
COOLDOWN_PAD_S = 0.5
SPEED_BOUND_CAP = 10.0  # m/s


class NonMonotonicTime(ValueError):
    """step() was called with a timestamp earlier than the previous call."""


class Zone(enum.Enum):
    SAFE = "safe"
    ACTIVATION = "activation"
    CRITICAL = "critical"


class Mode(enum.Enum):
    SAFE = "safe"
    ALERT = "alert"
    HALTED = "halted"


class Direction(enum.Enum):
    RIGHT = "right"
    LEFT = "left"
    DOWN = "down"
    BACK = "back"


# Fixed tie-break order: Right, Left, Down, Back.
_DIRECTION_VECTORS = (
    (Direction.RIGHT, np.array([1.0, 0.0, 0.0])),
    (Direction.LEFT, np.array([-1.0, 0.0, 0.0])),
    (Direction.DOWN, np.array([0.0, 0.0, -1.0])),
    (Direction.BACK, np.array([0.0, -1.0, 0.0])),
)


@dataclass(frozen=True)
class SafetyZones:
    activation_distance: float = 0.40  # m
    critical_distance: float = 0.25  # m
    resume_hysteresis: float = 0.0  # m

    def __post_init__(self):
        if not 0 < self.critical_distance < self.activation_distance:
            raise ValueError("zones require 0 < critical_distance < activation_distance")
        if self.resume_hysteresis < 0:
            raise ValueError("resume_hysteresis must be >= 0")


@dataclass(frozen=True)
class DirectionMapping:
    """Bijection between guidance patterns and movement directions."""

    pattern_to_direction: tuple = (
        ("1L", Direction.RIGHT),
        ("2L", Direction.LEFT),
        ("3L", Direction.DOWN),
        ("5H", Direction.BACK),
    )

    def __post_init__(self):
        pairs = tuple(
            (p if isinstance(p, PatternId) else PatternId.parse(p), d)
            for p, d in self.pattern_to_direction
        )
        patterns = [p for p, _ in pairs]
        directions = [d for _, d in pairs]
        if len(set(patterns)) != len(patterns) or len(set(directions)) != len(directions):
            raise ValueError("mapping must be a bijection")
        object.__setattr__(self, "pattern_to_direction", pairs)

    def pattern_for(self, direction: Direction) -> PatternId:
        for p, d in self.pattern_to_direction:
            if d is direction:
                return p
        raise KeyError(direction)

    def direction_for(self, pattern: PatternId) -> Direction:
        for p, d in self.pattern_to_direction:
            if p == pattern:
                return d
        raise KeyError(pattern)

    @property
    def patterns(self) -> tuple:
        return tuple(p for p, _ in self.pattern_to_direction)


class CommandKind(enum.Enum):
    START_PATTERN = "start_pattern"
    HALT_ROBOT = "halt_robot"
    RESUME_ROBOT = "resume_robot"


@dataclass(frozen=True)
class SafetyCommand:
    kind: CommandKind
    pattern: PatternId | None = None

    @classmethod
    def start_pattern(cls, pattern: PatternId) -> "SafetyCommand":
        return cls(CommandKind.START_PATTERN, pattern)

    @classmethod
    def halt_robot(cls) -> "SafetyCommand":
        return cls(CommandKind.HALT_ROBOT)

    @classmethod
    def resume_robot(cls) -> "SafetyCommand":
        return cls(CommandKind.RESUME_ROBOT)


@dataclass(frozen=True)
class SafetyState:
    mode: Mode = Mode.SAFE
    active_pattern: PatternId | None = None
    pattern_started_at: float | None = None
    robot_halted: bool = False
    cooldown_until: float = float("-inf")
    last_time: float = field(default=float("-inf"))


def classify(distance: float, zones: SafetyZones) -> Zone:
    """Zone for a hand-to-TCP distance."""
    if distance < 0:
        raise ValueError("distance must be >= 0")
    if distance < zones.critical_distance:
        return Zone.CRITICAL
    if distance < zones.activation_distance:
        return Zone.ACTIVATION
    return Zone.SAFE


def select_direction(hand: Point3, tcp: Point3, tcp_velocity) -> Direction:
    """Escape direction maximizing clearance from the predicted TCP position."""
    v = np.asarray(tcp_velocity, dtype=float).reshape(3)
    tcp_predicted = tcp.as_array() + v * PREDICTION_HORIZON_S
    escape = hand.as_array() - tcp_predicted
    norm = np.linalg.norm(escape)
    if norm < 1e-12:
        escape = np.array([1.0, 0.0, 0.0])
    else:
        escape = escape / norm
    best = _DIRECTION_VECTORS[0][0]
    best_dot = -np.inf
    for direction, vec in _DIRECTION_VECTORS:
        d = float(vec @ escape)
        if d > best_dot + 1e-12:
            best, best_dot = direction, d
    return best


def _pattern_finished(state: SafetyState, t: float) -> bool:
    if state.active_pattern is None:
        return True
    return t >= state.pattern_started_at + pattern_duration(state.active_pattern)


def step(
    state: SafetyState,
    distance: float,
    hand: Point3,
    tcp: Point3,
    tcp_velocity,
    t: float,
    zones: SafetyZones = SafetyZones(),
    mapping: DirectionMapping = DirectionMapping(),
) -> tuple:
    """Advance the state machine one sample; returns (new_state, commands)."""
    if t < state.last_time:
        raise NonMonotonicTime(f"t went backwards: {t} < {state.last_time}")
    zone = classify(distance, zones)
    commands = []
    mode = state.mode
    active_pattern = state.active_pattern
    pattern_started_at = state.pattern_started_at
    robot_halted = state.robot_halted
    cooldown_until = state.cooldown_until

    if robot_halted:
        if distance >= zones.critical_distance + zones.resume_hysteresis:
            commands.append(SafetyCommand.resume_robot())
            robot_halted = False
            mode = Mode.ALERT if zone is Zone.ACTIVATION else Mode.SAFE
        else:
            mode = Mode.HALTED
    if not robot_halted:
        if zone is Zone.CRITICAL:
            commands.append(SafetyCommand.halt_robot())
            robot_halted = True
            mode = Mode.HALTED
        elif zone is Zone.ACTIVATION:
            mode = Mode.ALERT
            if t >= cooldown_until:
                pattern = mapping.pattern_for(select_direction(hand, tcp, tcp_velocity))
                commands.append(SafetyCommand.start_pattern(pattern))
                active_pattern = pattern
                pattern_started_at = t
                cooldown_until = t + pattern_duration(pattern) + COOLDOWN_PAD_S
        else:
            mode = Mode.SAFE

    if mode is not Mode.ALERT and _pattern_finished(
        replace(state, active_pattern=active_pattern, pattern_started_at=pattern_started_at), t
    ):
        active_pattern = None
        pattern_started_at = None

    new_state = SafetyState(
        mode=mode,
        active_pattern=active_pattern,
        pattern_started_at=pattern_started_at,
        robot_halted=robot_halted,
        cooldown_until=cooldown_until,
        last_time=t,
    )
    return new_state, commands


def max_robot_speed(
    zones: SafetyZones,
    max_response_time: float,
    hand_speed: float,
    required_clearance: float,
) -> float:
    """Upper bound on robot approach speed keeping the critical zone clear.

    The robot may cover at most the activation-to-critical gap while the
    human reacts (max_response_time) and then clears the required distance
    at hand_speed.  Capped at 10 m/s for degenerate inputs.
    """
    if max_response_time < 0 or hand_speed <= 0 or required_clearance < 0:
        raise ValueError("response time and clearance must be >= 0, hand_speed > 0")
    gap = zones.activation_distance - zones.critical_distance
    denom = max_response_time + required_clearance / hand_speed
    if denom <= 0:
        return SPEED_BOUND_CAP
    return min(gap / denom, SPEED_BOUND_CAP)
