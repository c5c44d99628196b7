"""Camera poses for synthetic dataset collection.

Three groups: uniform random spawns in the mission area, 360-degree rings
around each obstacle, and laps of a square inset from the mission edges.
Every group is split train/val/test on its own.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .arena import Arena, Circle

SPLITS = ("train", "val", "test")
BACKGROUNDS = ("empty", "populated")


@dataclass(frozen=True)
class DatasetPlan:
    random_spawn: int = 10000
    scan_360: int = 21000
    square_path: int = 10000
    splits: tuple[float, float, float] = (0.7, 0.1, 0.2)
    attitude_jitter_deg: float = 5.0
    height_range: tuple[float, float] = (0.45, 0.55)
    ring_radius: float = 1.5
    ring_poses: int = 360
    square_inset: float = 0.5

    def __post_init__(self):
        if min(self.random_spawn, self.scan_360, self.square_path) < 0:
            raise ValueError("group counts must be >= 0")
        if abs(sum(self.splits) - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {sum(self.splits)}, not 1")
        if not self.height_range[0] <= self.height_range[1]:
            raise ValueError("height_range must be ordered")

    @classmethod
    def from_json(cls, doc: dict) -> "DatasetPlan":
        from .config import validate

        validate(doc, "dataset_plan")
        d = dict(doc)
        for k in ("splits", "height_range"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


class DatasetPose(NamedTuple):
    x: float
    y: float
    z: float
    yaw: float
    pitch: float
    roll: float
    group: int
    split: str
    heading: float  # nominal yaw before jitter
    tag: str = ""  # ring background or lap direction
    target: str = ""


CSV_COLUMNS = ("x", "y", "z", "yaw", "pitch", "roll", "group", "split")


def split_sizes(n: int, fractions=(0.7, 0.1, 0.2)) -> tuple[int, int, int]:
    """Val and test get floor(fraction * n); train takes the remainder."""
    val = math.floor(fractions[1] * n + 1e-9)
    test = math.floor(fractions[2] * n + 1e-9)
    return n - val - test, val, test


def assign_splits(n: int, group: int, seed: int, fractions=(0.7, 0.1, 0.2)) -> list[str]:
    """Deterministic stratified assignment: indices ordered by a keyed hash."""
    _, val, test = split_sizes(n, fractions)

    def key(i):
        return hashlib.blake2b(f"{seed}:{group}:{i}".encode(), digest_size=8).digest()

    order = sorted(range(n), key=key)
    out = ["train"] * n
    for i in order[:val]:
        out[i] = "val"
    for i in order[val:val + test]:
        out[i] = "test"
    return out


def _targets(arena: Arena) -> list[tuple[str, tuple[float, float]]]:
    out = []
    for i, ob in enumerate(arena.obstacles):
        s = ob.shape
        c = s.center if isinstance(s, Circle) else s.midpoint
        out.append((ob.name or f"obstacle-{i}", c))
    for i, g in enumerate(arena.gates):
        out.append((g.name or f"gate-{i}", g.center))
    return out


def _shares(n: int, k: int) -> list[int]:
    # n split into k near-equal parts, earlier parts take the remainder
    return [n // k + (i < n % k) for i in range(k)]


def _random_spawn(arena, n, rng):
    h = arena.mission_half
    for _ in range(n):
        x, y = rng.uniform(-h, h, 2)
        yield float(x), float(y), float(rng.uniform(-math.pi, math.pi)), "", ""


def _scan_360(arena, n, plan, rng):
    targets = _targets(arena)
    if n and not targets:
        raise ValueError("360 scan requested but the arena has no obstacles")
    cells = [(name, c, bg) for name, c in targets for bg in BACKGROUNDS]
    for (name, (cx, cy), bg), count in zip(cells, _shares(n, len(cells))):
        for j in range(count):
            a = 2 * math.pi * (j % plan.ring_poses) / plan.ring_poses
            x = cx + plan.ring_radius * math.cos(a)
            y = cy + plan.ring_radius * math.sin(a)
            yield x, y, math.atan2(cy - y, cx - x), bg, name


def _square_path(arena, n, plan):
    h = arena.mission_half - plan.square_inset
    corners = np.array([(-h, -h), (h, -h), (h, h), (-h, h), (-h, -h)])
    perim = 8 * h
    n_ccw = n - n // 2
    for direction, count in (("ccw", n_ccw), ("cw", n // 2)):
        path = corners if direction == "ccw" else corners[::-1]
        for j in range(count):
            s = perim * j / count
            k = min(int(s // (2 * h)), 3)
            a, b = path[k], path[k + 1]
            u = (s - 2 * h * k) / (2 * h)
            x, y = a + u * (b - a)
            yield float(x), float(y), math.atan2(b[1] - a[1], b[0] - a[0]), direction, ""


def sample_dataset_poses(arena: Arena, plan: DatasetPlan = DatasetPlan(), seed: int = 0
                         ) -> list[DatasetPose]:
    jitter = math.radians(plan.attitude_jitter_deg)
    lo, hi = plan.height_range
    groups = {
        1: lambda rng: _random_spawn(arena, plan.random_spawn, rng),
        2: lambda rng: _scan_360(arena, plan.scan_360, plan, rng),
        3: lambda rng: _square_path(arena, plan.square_path, plan),
    }
    poses = []
    for g, gen in groups.items():
        rng = np.random.default_rng(np.random.SeedSequence([seed, g]))
        base = list(gen(rng))
        splits = assign_splits(len(base), g, seed, plan.splits)
        for (x, y, heading, tag, target), split in zip(base, splits):
            dyaw, pitch, roll = rng.uniform(-jitter, jitter, 3)
            z = rng.uniform(lo, hi)
            yaw = math.remainder(heading + dyaw, 2 * math.pi)
            poses.append(DatasetPose(x, y, float(z), yaw, float(pitch), float(roll), g, split,
                                     heading, tag, target))
    return poses
