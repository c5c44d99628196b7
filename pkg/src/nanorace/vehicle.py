"""Closed-loop episode engine.

A fixed-step 100 Hz loop integrates unicycle kinematics and dead-reckoning
drift; every 1/30 s the perception oracle runs, its output goes through the
8-bit UART path and a low-pass filter, and the policy emits a new setpoint.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import arena as arena_mod
from .arena import Arena, PlacementError, clearance, gate_pass, in_mission_area
from .perception import (SectorProbs, SensorGeometry, obstacle_distances, perception_noise,
                         probs_from_distances, wire_roundtrip)
from .policy import (PolicyKind, PolicyParams, Setpoint, enter_spin, initial_state, policy_step,
                     wp_update, wrap_angle)


class TrueState(NamedTuple):
    x: float
    y: float
    yaw: float
    v: float = 0.0


class EstState(NamedTuple):
    x: float
    y: float
    yaw: float


class Increment(NamedTuple):
    """Body-frame motion over one step: distance along the new heading, then yaw change."""

    forward: float
    dyaw: float


@dataclass(frozen=True)
class ErrorModel:
    sigma_x: float = 0.05  # m/sqrt(s)
    sigma_y: float = 0.05  # m/sqrt(s)
    sigma_yaw: float = math.radians(2.0)  # rad/sqrt(s)
    bias_x: float = 0.0  # m/s
    bias_y: float = 0.0
    bias_yaw: float = 0.0  # rad/s

    def __post_init__(self):
        if min(self.sigma_x, self.sigma_y, self.sigma_yaw) < 0:
            raise ValueError("error model sigmas must be >= 0")

    @classmethod
    def zero(cls) -> "ErrorModel":
        return cls(0.0, 0.0, 0.0)

    def scaled(self, k: float) -> "ErrorModel":
        return ErrorModel(self.sigma_x * k, self.sigma_y * k, self.sigma_yaw * k,
                          self.bias_x, self.bias_y, self.bias_yaw)

    @property
    def is_zero(self) -> bool:
        return not any(asdict(self).values())

    @classmethod
    def from_json(cls, doc: dict) -> "ErrorModel":
        from .config import validate

        validate(doc, "error_model")
        base = cls.zero()
        return cls(**{**asdict(base), **{k: float(v) for k, v in doc.items()}})

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LoopTimings:
    perception_period: float = 1 / 30
    control_period: float = 1 / 100
    episode_length: float = 300.0
    obstacle_move_period: float = 30.0

    def __post_init__(self):
        if self.perception_period < self.control_period:
            raise ValueError("perception_period must be >= control_period")
        if min(self.control_period, self.episode_length) <= 0:
            raise ValueError("periods must be positive")


class EventKind(str, Enum):
    GATE_PASS = "GATE_PASS"
    OBSTACLE_MOVED = "OBSTACLE_MOVED"
    AREA_EXIT = "AREA_EXIT"
    AREA_ENTER = "AREA_ENTER"
    WALL_CONTACT = "WALL_CONTACT"
    OBSTACLE_CONTACT = "OBSTACLE_CONTACT"
    WP_VISIT = "WP_VISIT"


class Event(NamedTuple):
    t: float
    kind: EventKind
    detail: str = ""


SERIES = ("t", "x", "y", "yaw", "x_est", "y_est", "yaw_est", "pl", "pc", "pr",
          "speed", "yawrate", "mode")


@dataclass
class RunRecord:
    series: dict[str, np.ndarray]
    events: list[Event]
    config: dict = field(default_factory=dict)
    seed: int = 0

    def __len__(self) -> int:
        return len(self.series["t"])

    def __getattr__(self, name):
        # series columns read as attributes: rec.x, rec.pc, ...
        series = self.__dict__.get("series")
        if series is not None and name in series:
            return series[name]
        raise AttributeError(name)

    def count(self, kind: EventKind) -> int:
        return sum(1 for e in self.events if e.kind is kind)


# --------------------------------------------------------------------------
# step functions


def low_level_step(s: TrueState, sp: Setpoint, dt: float, tau_v: float = 0.3) -> TrueState:
    """First-order speed lag + unicycle kinematics (rotate, then translate)."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    v = s.v + (sp.forward_speed - s.v) * min(1.0, dt / tau_v)
    yaw = wrap_angle(s.yaw + sp.yaw_rate * dt)
    d = v * dt
    return TrueState(s.x + d * math.cos(yaw), s.y + d * math.sin(yaw), yaw, v)


def estimate_step(e: EstState, delta: Increment, m: ErrorModel, rng, dt: float) -> EstState:
    """Compose the true body-frame increment onto the estimate, plus drift.

    Per-step noise has variance sigma**2 * dt, so one second of updates
    accumulates variance sigma**2. Heading error rotates every later increment.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    z = rng.standard_normal(3)
    sq = math.sqrt(dt)
    yaw = wrap_angle(e.yaw + delta.dyaw + (m.sigma_yaw * sq * z[2] + m.bias_yaw * dt))
    d = delta.forward
    return EstState(e.x + d * math.cos(yaw) + (m.sigma_x * sq * z[0] + m.bias_x * dt),
                    e.y + d * math.sin(yaw) + (m.sigma_y * sq * z[1] + m.bias_y * dt), yaw)


def low_pass(prev: SectorProbs, new: SectorProbs, alpha: float) -> SectorProbs:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1:
        return SectorProbs(*new)
    return SectorProbs(prev[0] + alpha * (new[0] - prev[0]),
                       prev[1] + alpha * (new[1] - prev[1]),
                       prev[2] + alpha * (new[2] - prev[2]))


class _NormalBuffer:
    """Hands out standard normals from pre-drawn blocks (same stream, fewer calls)."""

    def __init__(self, rng: np.random.Generator, block: int = 3 * 4096):
        self._rng = rng
        self._block = block
        self._buf = rng.standard_normal(block)
        self._i = 0

    def standard_normal(self, n: int) -> np.ndarray:
        if self._i + n > self._block:
            self._buf = self._rng.standard_normal(self._block)
            self._i = 0
        out = self._buf[self._i:self._i + n]
        self._i += n
        return out


# --------------------------------------------------------------------------
# episode


@dataclass(frozen=True)
class EpisodeOptions:
    geom: SensorGeometry = SensorGeometry()
    alpha: float = 0.3
    noise_sigma: float = 0.0
    tau_v: float = 0.3
    drone_radius: float = 0.05
    contact_penalty: float = 10.0
    start: tuple[float, float, float] | None = None  # default: first waypoint, facing the second
    wire: bool = True
    move_obstacles: bool = True
    move_clearance: float = 1.0
    world_seed: int | None = None


def default_start(arena: Arena) -> tuple[float, float, float]:
    (x0, y0), (x1, y1) = arena.waypoints[0], arena.waypoints[1]
    yaw = math.atan2(y1 - y0, x1 - x0) if (x0, y0) != (x1, y1) else 0.0
    return (x0, y0, yaw)


def run_episode(arena: Arena, params: PolicyParams, model: ErrorModel | None = None,
                timings: LoopTimings | None = None, seed: int = 0,
                options: EpisodeOptions | None = None) -> RunRecord:
    model = model or ErrorModel.zero()
    timings = timings or LoopTimings()
    opt = options or EpisodeOptions()
    geom = opt.geom
    ground_aware = params.kind.ground_aware
    is_p2 = params.kind is PolicyKind.POLICY2

    policy_ss, drift_ss, noise_ss, world_ss = np.random.SeedSequence(seed).spawn(4)
    if opt.world_seed is not None:
        world_ss = np.random.SeedSequence(opt.world_seed)
    policy_rng = np.random.default_rng(policy_ss)
    drift_rng = _NormalBuffer(np.random.default_rng(drift_ss))
    noise_rng = np.random.default_rng(noise_ss)
    world_rng = np.random.default_rng(world_ss)

    start = opt.start or default_start(arena)
    s = TrueState(float(start[0]), float(start[1]), wrap_angle(float(start[2])), 0.0)
    est = EstState(s.x, s.y, s.yaw)
    pstate = initial_state(arena.waypoints)
    filt = SectorProbs(0.0, 0.0, 0.0)
    sp = Setpoint(0.0, 0.0)

    dt = timings.control_period
    n_steps = int(round(timings.episode_length / dt))
    eps = 1e-9
    t_next_perc = 0.0
    t_next_move = timings.obstacle_move_period
    halt_until = -math.inf
    pending_spin = False
    inside = in_mission_area(arena, (s.x, s.y))
    budget = clearance(arena, (s.x, s.y)) - opt.drone_radius
    gates = [g.opening for g in arena.gates]
    events: list[Event] = []
    if not inside:
        events.append(Event(0.0, EventKind.AREA_EXIT, "start"))

    cols = {k: [] for k in SERIES}

    def record(t):
        cols["t"].append(t)
        cols["x"].append(s.x)
        cols["y"].append(s.y)
        cols["yaw"].append(s.yaw)
        cols["x_est"].append(est.x)
        cols["y_est"].append(est.y)
        cols["yaw_est"].append(est.yaw)
        cols["pl"].append(filt[0])
        cols["pc"].append(filt[1])
        cols["pr"].append(filt[2])
        cols["speed"].append(sp.forward_speed)
        cols["yawrate"].append(sp.yaw_rate)
        cols["mode"].append(pstate.mode.value)

    record(0.0)
    for k in range(n_steps):
        t = k * dt
        if opt.move_obstacles and t >= t_next_move - eps:
            t_next_move += timings.obstacle_move_period
            try:
                arena, idx = arena_mod.move_dynamic_obstacle(arena, world_rng, (s.x, s.y),
                                                             clearance_m=opt.move_clearance)
                events.append(Event(t, EventKind.OBSTACLE_MOVED, arena.obstacles[idx].name or str(idx)))
                budget = clearance(arena, (s.x, s.y)) - opt.drone_radius
            except PlacementError:
                pass

        if t >= t_next_perc - eps:
            t_next_perc += timings.perception_period
            raw = probs_from_distances(obstacle_distances(arena, (s.x, s.y, s.yaw), geom, ground_aware), geom)
            if opt.noise_sigma > 0:
                raw = perception_noise(raw, opt.noise_sigma, noise_rng)
            if opt.wire:
                raw = wire_roundtrip(raw)
            filt = low_pass(filt, raw, opt.alpha)
            if t < halt_until:
                sp = Setpoint(0.0, 0.0)
            else:
                if pending_spin:
                    pending_spin = False
                    pstate = enter_spin(pstate, est.yaw, params, policy_rng)
                if is_p2:
                    before = pstate.wp_index
                    pstate = wp_update(pstate, est, params)
                    if pstate.wp_index != before:
                        events.append(Event(t, EventKind.WP_VISIT, str(before)))
                sp, pstate = policy_step(pstate, filt, est, params, policy_rng)

        dyaw = sp.yaw_rate * dt
        new = low_level_step(s, sp, dt, opt.tau_v)
        moved = math.hypot(new.x - s.x, new.y - s.y)
        budget -= moved
        forward = new.v * dt
        if budget <= 0:
            c = clearance(arena, (new.x, new.y))
            if c <= opt.drone_radius:
                h = arena.outer_half
                wall = h - max(abs(new.x), abs(new.y))
                kind = EventKind.WALL_CONTACT if wall <= opt.drone_radius else EventKind.OBSTACLE_CONTACT
                events.append(Event(t + dt, kind))
                new = TrueState(s.x, s.y, new.yaw, 0.0)
                forward = 0.0
                halt_until = t + dt + opt.contact_penalty
                pending_spin = True
                sp = Setpoint(0.0, 0.0)
                c = clearance(arena, (new.x, new.y))
            budget = c - opt.drone_radius

        for gi, g in enumerate(gates):
            if _near(g, new, s) and gate_pass(arena.gates[gi], (s.x, s.y), (new.x, new.y)):
                events.append(Event(t + dt, EventKind.GATE_PASS, arena.gates[gi].name or str(gi)))
        now_inside = in_mission_area(arena, (new.x, new.y))
        if now_inside != inside:
            events.append(Event(t + dt, EventKind.AREA_ENTER if now_inside else EventKind.AREA_EXIT))
            inside = now_inside

        est = estimate_step(est, Increment(forward, dyaw), model, drift_rng, dt)
        s = new
        record((k + 1) * dt)

    series = {k: np.asarray(v) for k, v in cols.items()}
    return RunRecord(series, events, {"policy": params.kind.value, "v_target": params.v_target},
                     seed)


def _near(opening, a: TrueState, b: TrueState) -> bool:
    (x0, y0), (x1, y1) = opening
    return not (max(a.x, b.x) < min(x0, x1) - 1e-9 or min(a.x, b.x) > max(x0, x1) + 1e-9
                or max(a.y, b.y) < min(y0, y1) - 1e-9 or min(a.y, b.y) > max(y0, y1) + 1e-9)
