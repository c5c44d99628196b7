"""Competition score and the distance/gate accounting that feeds it."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arena import Arena, gate_pass

ENV_MULTIPLIERS = (1, 5, 10)
COMP_MULTIPLIERS = (1, 5)
GATE_BONUS_M = 10.0


class ScoreError(ValueError):
    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code


@dataclass(frozen=True)
class ScoreInput:
    dist: float
    gates: int = 0
    env: int = 1
    comp: int = 1

    def __post_init__(self):
        if self.env not in ENV_MULTIPLIERS:
            raise ScoreError("INVALID_MULTIPLIER", f"alpha_env={self.env}, allowed {ENV_MULTIPLIERS}")
        if self.comp not in COMP_MULTIPLIERS:
            raise ScoreError("INVALID_MULTIPLIER", f"alpha_comp={self.comp}, allowed {COMP_MULTIPLIERS}")
        if self.dist < 0 or self.gates < 0:
            raise ValueError("distance and gate count must be >= 0")


def score(s: ScoreInput) -> float:
    return (s.dist + GATE_BONUS_M * s.gates) * s.env * s.comp


def clip_segment(p0, p1, half: float) -> float:
    """Length of the part of segment p0-p1 inside the square [-half, half]^2 (Liang-Barsky)."""
    x0, y0 = p0
    dx, dy = p1[0] - x0, p1[1] - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0 + half), (dx, half - x0), (-dy, y0 + half), (dy, half - y0)):
        if p == 0:
            if q < 0:
                return 0.0
            continue
        r = q / p
        if p < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return 0.0
    return (t1 - t0) * math.hypot(dx, dy)


def in_area_distance_xy(x: np.ndarray, y: np.ndarray, half: float) -> float:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(x) < 2:
        return 0.0
    seg = np.hypot(np.diff(x), np.diff(y))
    inside = (np.abs(x) <= half) & (np.abs(y) <= half)
    both = inside[:-1] & inside[1:]
    total = float(seg[both].sum())
    # only steps with an endpoint outside need clipping
    for i in np.flatnonzero(~both):
        total += clip_segment((x[i], y[i]), (x[i + 1], y[i + 1]), half)
    return total


def in_area_distance(rec, arena: Arena) -> float:
    """Distance flown inside the mission area, boundary-crossing steps clipped."""
    return in_area_distance_xy(rec.x, rec.y, arena.mission_half)


def count_gate_passes_xy(x, y, arena: Arena) -> int:
    n = 0
    pts = np.column_stack([np.asarray(x, float), np.asarray(y, float)])
    for g in arena.gates:
        for a, b in zip(pts[:-1], pts[1:]):
            n += gate_pass(g, (a[0], a[1]), (b[0], b[1]))
    return n


def count_gate_passes(rec, arena: Arena) -> int:
    """Gate passes in a record: its GATE_PASS events, or a recount from the track
    for plain trajectories that carry no event list."""
    from .vehicle import EventKind

    events = getattr(rec, "events", None)
    if events is not None:
        return sum(1 for e in events if e.kind is EventKind.GATE_PASS)
    return count_gate_passes_xy(rec.x, rec.y, arena)
