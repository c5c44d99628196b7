"""Baseline, Policy 1 and Policy 2 as a pure state machine.

Thresholded sector probabilities plus the estimated pose go in, a
{forward speed, yaw rate} setpoint comes out. Yaw is positive
counterclockwise, so steering left means a positive yaw rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple, Sequence

from .perception import SectorProbs

TWO_PI = 2 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.remainder(a, TWO_PI)
    return math.pi if a == -math.pi else a


class PolicyKind(str, Enum):
    BASELINE = "BASELINE"
    POLICY1 = "POLICY1"
    POLICY2 = "POLICY2"

    @property
    def ground_aware(self) -> bool:
        return self is not PolicyKind.BASELINE


class Mode(str, Enum):
    CRUISE = "CRUISE"
    AVOID = "AVOID"
    SPIN = "SPIN"
    WP_NAV = "WP_NAV"


class WpOrder(str, Enum):
    CW = "CW"
    CCW = "CCW"

    @property
    def step(self) -> int:
        return 1 if self is WpOrder.CCW else -1

    def flipped(self) -> "WpOrder":
        return WpOrder.CW if self is WpOrder.CCW else WpOrder.CCW


class Direction(str, Enum):
    LEFT = "LEFT"
    CENTER = "CENTER"
    RIGHT = "RIGHT"


@dataclass(frozen=True)
class PolicyParams:
    kind: PolicyKind = PolicyKind.POLICY2
    v_target: float = 1.5
    threshold: float = 0.7
    turn_rate: float = 90.0  # deg/s
    wp_radius: float = 0.5
    spin_rate: float = 90.0  # deg/s
    k_yaw: float = 2.0  # 1/s
    speed_exponent: float = 1.0
    spin_tolerance: float = 5.0  # deg

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if not self.v_target > 0:
            raise ValueError("v_target must be > 0")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if not self.wp_radius > 0:
            raise ValueError("wp_radius must be > 0")

    @property
    def turn_rate_rad(self) -> float:
        return math.radians(self.turn_rate)

    @property
    def spin_rate_rad(self) -> float:
        return math.radians(self.spin_rate)


@dataclass(frozen=True)
class PolicyState:
    mode: Mode = Mode.CRUISE
    spin_target_yaw: float = 0.0
    spin_dir: int = 1
    wp_index: int = 0
    wp_order: WpOrder = WpOrder.CCW
    visited: tuple[bool, bool, bool, bool] = (False, False, False, False)
    laps: int = 0
    waypoints: tuple[tuple[float, float], ...] = field(
        default=((-3.0, -3.0), (3.0, -3.0), (3.0, 3.0), (-3.0, 3.0)))


class Setpoint(NamedTuple):
    forward_speed: float
    yaw_rate: float


def select_direction(probs: Sequence[float]) -> Direction:
    """Least-blocked direction; ties prefer CENTER, then LEFT."""
    l, c, r = probs
    best = min(l, c, r)
    if c == best:
        return Direction.CENTER
    if l == best:
        return Direction.LEFT
    return Direction.RIGHT


def _draw_spin(rng) -> tuple[int, float]:
    s = 1 if rng.random() < 0.5 else -1
    u = rng.uniform(0.0, math.pi / 6)
    return s, u


def spin_target(entry_yaw: float, rng) -> float:
    """Escape heading: about-turn plus up to 30 degrees, random side."""
    s, u = _draw_spin(rng)
    return wrap_angle(entry_yaw + s * (math.pi + u))


def wp_update(state: PolicyState, est_pose, params: PolicyParams) -> PolicyState:
    """Mark the current waypoint visited once inside its radius and advance."""
    wx, wy = state.waypoints[state.wp_index]
    if math.hypot(est_pose[0] - wx, est_pose[1] - wy) > params.wp_radius:
        return state
    visited = list(state.visited)
    visited[state.wp_index] = True
    laps = state.laps
    if all(visited):
        visited = [False] * 4
        laps += 1
    n = len(state.waypoints)
    return replace(state, visited=tuple(visited), laps=laps,
                   wp_index=(state.wp_index + state.wp_order.step) % n)


def enter_spin(state: PolicyState, yaw: float, params: PolicyParams, rng) -> PolicyState:
    """Start an in-place about-turn; Policy 2 also reverses its waypoint cycle.

    On reversal the target becomes the neighbour in the new direction, i.e.
    the waypoint the drone was coming from.
    """
    s, u = _draw_spin(rng)
    new = replace(state, mode=Mode.SPIN, spin_dir=s,
                  spin_target_yaw=wrap_angle(yaw + s * (math.pi + u)))
    if params.kind is PolicyKind.POLICY2:
        order = state.wp_order.flipped()
        n = len(state.waypoints)
        new = replace(new, wp_order=order, wp_index=(state.wp_index + order.step) % n)
    return new


def _speed(params: PolicyParams, p_center: float) -> float:
    return params.v_target * (1.0 - p_center) ** params.speed_exponent


def policy_step(state: PolicyState, probs: SectorProbs, est_pose, params: PolicyParams,
                rng) -> tuple[Setpoint, PolicyState]:
    l, c, r = probs
    yaw = est_pose[2]

    if state.mode is Mode.SPIN:
        err = wrap_angle(state.spin_target_yaw - yaw)
        if abs(err) >= math.radians(params.spin_tolerance):
            return Setpoint(0.0, state.spin_dir * params.spin_rate_rad), state

    th = params.threshold
    fl, fc, fr = l >= th, c >= th, r >= th
    turn = params.turn_rate_rad

    if fl and fc and fr:
        new = enter_spin(state, yaw, params, rng)
        return Setpoint(0.0, new.spin_dir * params.spin_rate_rad), new

    v = _speed(params, c)
    if fl != fr:
        # one side blocked: steer away from it
        return Setpoint(v, -turn if fl else turn), replace(state, mode=Mode.AVOID)
    if fl and fr:
        d = select_direction(probs)
        rate = {Direction.LEFT: turn, Direction.RIGHT: -turn, Direction.CENTER: 0.0}[d]
        return Setpoint(v, rate), replace(state, mode=Mode.AVOID)
    if fc:
        # center only: go round on the freer side, left on a tie
        return Setpoint(v, turn if l <= r else -turn), replace(state, mode=Mode.AVOID)

    if params.kind is PolicyKind.POLICY2:
        wx, wy = state.waypoints[state.wp_index]
        bearing = math.atan2(wy - est_pose[1], wx - est_pose[0])
        rate = params.k_yaw * wrap_angle(bearing - yaw)
        rate = max(-turn, min(turn, rate))
        return Setpoint(v, rate), replace(state, mode=Mode.WP_NAV)
    return Setpoint(v, 0.0), replace(state, mode=Mode.CRUISE)


def initial_state(waypoints, start_index: int = 0, order: WpOrder = WpOrder.CCW) -> PolicyState:
    return PolicyState(wp_index=start_index, wp_order=order,
                       waypoints=tuple((float(x), float(y)) for x, y in waypoints))
