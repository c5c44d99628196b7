"""Planar world model of the race arena.

Everything lives in a 2D plane at flight height: obstacles are full-height
prisms, so occlusion reduces to ray casting against circles and segments.
All squares are axis-aligned and centered on the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import cached_property
from typing import Sequence

import numba
import numpy as np

Point = tuple[float, float]


class SurfaceClass(IntEnum):
    # codes double as the segmentation raster values
    NONE = 0
    OBSTACLE = 1
    GATE_FRAME = 2
    WALL = 3
    OUT_OF_AREA_GROUND = 4


class GeometryError(ValueError):
    """Arena dimensions or shapes violate a containment/shape invariant."""


class PlacementError(RuntimeError):
    def __init__(self, reason: str, message: str = ""):
        super().__init__(message or reason)
        self.reason = reason  # "NO_MOVABLE" or "EXHAUSTED"


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"circle radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class Segment:
    p0: Point
    p1: Point
    thickness: float = 0.0

    def __post_init__(self):
        if math.dist(self.p0, self.p1) <= 0:
            raise GeometryError("segment has zero length")
        if self.thickness < 0:
            raise GeometryError("segment thickness must be >= 0")

    @property
    def length(self) -> float:
        return math.dist(self.p0, self.p1)

    @property
    def midpoint(self) -> Point:
        return ((self.p0[0] + self.p1[0]) / 2, (self.p0[1] + self.p1[1]) / 2)

    @property
    def angle(self) -> float:
        return math.atan2(self.p1[1] - self.p0[1], self.p1[0] - self.p0[0])


Shape = Circle | Segment


@dataclass(frozen=True)
class Obstacle:
    shape: Shape
    movable: bool = False
    surface_class: SurfaceClass = SurfaceClass.OBSTACLE
    name: str = ""


@dataclass(frozen=True)
class Gate:
    posts: tuple[Obstacle, Obstacle]
    opening: tuple[Point, Point]
    pass_direction_agnostic: bool = True
    name: str = ""

    @property
    def center(self) -> Point:
        (ax, ay), (bx, by) = self.opening
        return ((ax + bx) / 2, (ay + by) / 2)


@dataclass(frozen=True)
class Hit:
    distance: float
    surface_class: SurfaceClass


@dataclass(frozen=True)
class Arena:
    outer_half: float = 5.0
    mission_half: float = 4.0
    wp_half: float = 3.0
    obstacles: tuple[Obstacle, ...] = ()
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if not (self.outer_half > 0 and self.mission_half > 0 and self.wp_half >= 0):
            raise GeometryError("arena dimensions must be positive")
        if self.mission_half > self.outer_half:
            raise GeometryError(
                f"mission area ({2 * self.mission_half} m) does not fit in outer bounds "
                f"({2 * self.outer_half} m)")
        if self.wp_half > self.mission_half:
            raise GeometryError("waypoint square does not fit in the mission area")

    @property
    def waypoints(self) -> tuple[Point, ...]:
        # index order is counterclockwise
        h = self.wp_half
        return ((-h, -h), (h, -h), (h, h), (-h, h))

    def all_obstacles(self) -> tuple[Obstacle, ...]:
        """Free obstacles plus every gate post."""
        posts = tuple(p for g in self.gates for p in g.posts)
        return self.obstacles + posts

    @cached_property
    def _geometry(self) -> "_Geometry":
        return _Geometry.build(self)


def ground_class(arena: Arena, p: Point) -> SurfaceClass:
    """Ground classification: green turf inside the mission area, out-of-area elsewhere."""
    return SurfaceClass.NONE if in_mission_area(arena, p) else SurfaceClass.OUT_OF_AREA_GROUND


# --------------------------------------------------------------------------
# construction


@dataclass
class ArenaConfig:
    outer: float = 10.0
    mission: float = 8.0
    wp_half_side: float = 3.0
    pole_radius: float = 0.15
    panel_thickness: float = 0.05
    panel_widths: tuple[float, ...] = (1.0, 1.5, 3.0)
    gate_opening: float = 1.0
    gate_post_length: float = 0.1
    # None means "use the default seven-object layout"
    obstacles: list[Obstacle] | None = None
    gates: list[Gate] | None = None


def make_gate(center: Point, angle: float, opening: float = 1.0,
              post_length: float = 0.1, thickness: float = 0.05, name: str = "") -> Gate:
    """Gate whose opening is centred on ``center`` and runs along ``angle``.

    The two posts are collinear with the opening and sit just outside it.
    """
    ux, uy = math.cos(angle), math.sin(angle)
    cx, cy = center
    h = opening / 2
    a = (cx - ux * h, cy - uy * h)
    b = (cx + ux * h, cy + uy * h)
    # posts stay clear of the opening ends by half their thickness
    g = thickness / 2
    post_a = Segment((a[0] - ux * (g + post_length), a[1] - uy * (g + post_length)),
                     (a[0] - ux * g, a[1] - uy * g), thickness)
    post_b = Segment((b[0] + ux * g, b[1] + uy * g),
                     (b[0] + ux * (g + post_length), b[1] + uy * (g + post_length)), thickness)
    posts = (Obstacle(post_a, False, SurfaceClass.GATE_FRAME, f"{name}-post-a"),
             Obstacle(post_b, False, SurfaceClass.GATE_FRAME, f"{name}-post-b"))
    return Gate(posts, (a, b), True, name)


def default_obstacles(cfg: ArenaConfig) -> list[Obstacle]:
    r = cfg.pole_radius
    t = cfg.panel_thickness
    obs = [
        Obstacle(Circle((-1.5, 1.0), r), True, name="pole-1"),
        Obstacle(Circle((1.8, -0.8), r), True, name="pole-2"),
    ]
    anchors = [((-1.0, -1.5), 0.0), ((1.5, 1.5), math.pi / 2), ((0.0, 0.5), 0.0)]
    for w, ((cx, cy), ang) in zip(cfg.panel_widths, anchors):
        dx, dy = math.cos(ang) * w / 2, math.sin(ang) * w / 2
        obs.append(Obstacle(Segment((cx - dx, cy - dy), (cx + dx, cy + dy), t), True,
                            name=f"panel-{w:g}m"))
    return obs


def default_gates(cfg: ArenaConfig) -> list[Gate]:
    # openings straddle the waypoint square edges so the lap path threads them
    h = cfg.wp_half_side
    return [
        make_gate((0.0, -h), math.pi / 2, cfg.gate_opening, cfg.gate_post_length,
                  cfg.panel_thickness, "gate-1"),
        make_gate((0.0, h), math.pi / 2, cfg.gate_opening, cfg.gate_post_length,
                  cfg.panel_thickness, "gate-2"),
    ]


def build_arena(config: ArenaConfig | None = None) -> Arena:
    cfg = config or ArenaConfig()
    if not (cfg.outer > 0 and cfg.mission > 0):
        raise GeometryError("outer and mission sizes must be positive")
    obstacles = default_obstacles(cfg) if cfg.obstacles is None else list(cfg.obstacles)
    gates = default_gates(cfg) if cfg.gates is None else list(cfg.gates)
    arena = Arena(cfg.outer / 2, cfg.mission / 2, cfg.wp_half_side, tuple(obstacles), tuple(gates))
    for ob in arena.all_obstacles():
        if not _shape_inside(ob.shape, arena.outer_half):
            raise GeometryError(f"obstacle {ob.name or ob.shape} leaves the outer bounds")
    return arena


# --------------------------------------------------------------------------
# queries


def in_mission_area(arena: Arena, p: Point) -> bool:
    h = arena.mission_half
    return -h <= p[0] <= h and -h <= p[1] <= h


def _rect_edges(seg: Segment) -> list[tuple[float, float, float, float]]:
    (x0, y0), (x1, y1) = seg.p0, seg.p1
    if seg.thickness == 0:
        return [(x0, y0, x1, y1)]
    L = seg.length
    nx, ny = -(y1 - y0) / L * seg.thickness / 2, (x1 - x0) / L * seg.thickness / 2
    c = [(x0 + nx, y0 + ny), (x1 + nx, y1 + ny), (x1 - nx, y1 - ny), (x0 - nx, y0 - ny)]
    return [(*c[i], *c[(i + 1) % 4]) for i in range(4)]


@dataclass
class _Geometry:
    """Flattened numpy arrays for vectorised ray casting."""

    segs: np.ndarray  # (M, 4) x0 y0 x1 y1
    seg_cls: np.ndarray  # (M,)
    circles: np.ndarray  # (K, 3) cx cy r
    circ_cls: np.ndarray  # (K,)
    # capsule view for clearance: (P, 5) x0 y0 x1 y1 radius
    capsules: np.ndarray = field(default_factory=lambda: np.zeros((0, 5)))

    @classmethod
    def build(cls, arena: Arena) -> "_Geometry":
        segs, seg_cls, circles, circ_cls, caps = [], [], [], [], []
        for ob in arena.all_obstacles():
            s = ob.shape
            if isinstance(s, Circle):
                circles.append((*s.center, s.radius))
                circ_cls.append(int(ob.surface_class))
                caps.append((*s.center, *s.center, s.radius))
            else:
                for e in _rect_edges(s):
                    segs.append(e)
                    seg_cls.append(int(ob.surface_class))
                caps.append((*s.p0, *s.p1, s.thickness / 2))
        h = arena.outer_half
        corners = [(-h, -h), (h, -h), (h, h), (-h, h)]
        for i in range(4):
            segs.append((*corners[i], *corners[(i + 1) % 4]))
            seg_cls.append(int(SurfaceClass.WALL))
        return cls(np.array(segs, float).reshape(-1, 4), np.array(seg_cls, np.int64),
                   np.array(circles, float).reshape(-1, 3), np.array(circ_cls, np.int64),
                   np.array(caps, float).reshape(-1, 5))


def cast_fan(arena: Arena, origin: Point, angles: np.ndarray, max_range: float
             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cast a fan of rays from ``origin``.

    Returns ``(dist, cls, fence)``: the nearest physical surface hit per ray
    (``inf``/NONE beyond ``max_range``) and, separately, the distance at
    which each ray leaves the mission area (``inf`` if it never does within
    range). Keeping the virtual fence separate lets callers decide whether the
    out-of-area ground is opaque.
    """
    geo = arena._geometry
    return _fan_kernel(float(origin[0]), float(origin[1]), np.ascontiguousarray(angles, np.float64),
                       float(max_range), geo.segs, geo.seg_cls, geo.circles, geo.circ_cls,
                       float(arena.mission_half))


@numba.njit(cache=True)
def _fan_kernel(ox, oy, angles, max_range, segs, seg_cls, circles, circ_cls, h):
    n = angles.shape[0]
    best = np.full(n, np.inf)
    cls = np.zeros(n, np.int64)
    fence = np.full(n, np.inf)
    # cull shapes that cannot be reached within range
    m = segs.shape[0]
    keep = np.zeros(m, np.bool_)
    for j in range(m):
        keep[j] = _pt_seg_dist_nb(ox, oy, segs[j, 0], segs[j, 1], segs[j, 2], segs[j, 3]) <= max_range
    for i in range(n):
        dx = math.cos(angles[i])
        dy = math.sin(angles[i])
        b_t = np.inf
        b_c = 0
        for j in range(m):
            if not keep[j]:
                continue
            x0 = segs[j, 0]
            y0 = segs[j, 1]
            ex = segs[j, 2] - x0
            ey = segs[j, 3] - y0
            denom = dx * ey - dy * ex
            if denom == 0.0:
                continue
            wx = x0 - ox
            wy = y0 - oy
            t = (wx * ey - wy * ex) / denom
            s = (wx * dy - wy * dx) / denom
            if t >= 0.0 and 0.0 <= s <= 1.0 and t < b_t:
                b_t = t
                b_c = seg_cls[j]
        for j in range(circles.shape[0]):
            wx = circles[j, 0] - ox
            wy = circles[j, 1] - oy
            r = circles[j, 2]
            b = dx * wx + dy * wy
            c = wx * wx + wy * wy - r * r
            disc = b * b - c
            if disc < 0.0:
                continue
            sq = math.sqrt(disc)
            if b + sq < 0.0:
                continue
            t = max(b - sq, 0.0)
            if t < b_t:
                b_t = t
                b_c = circ_cls[j]
        if b_t <= max_range:
            best[i] = b_t
            cls[i] = b_c
        f = _exit_nb(h, ox, oy, dx, dy)
        if f <= max_range:
            fence[i] = f
    return best, cls, fence


@numba.njit(cache=True)
def _pt_seg_dist_nb(px, py, ax, ay, bx, by):
    abx = bx - ax
    aby = by - ay
    L2 = abx * abx + aby * aby
    t = 0.0
    if L2 > 0:
        t = min(1.0, max(0.0, ((px - ax) * abx + (py - ay) * aby) / L2))
    return math.hypot(px - ax - t * abx, py - ay - t * aby)


@numba.njit(cache=True)
def _exit_nb(h, ox, oy, dx, dy):
    t_enter = -np.inf
    t_exit = np.inf
    for o, d in ((ox, dx), (oy, dy)):
        if d == 0.0:
            if o < -h or o > h:
                return np.inf
            continue
        t1 = (-h - o) / d
        t2 = (h - o) / d
        t_enter = max(t_enter, min(t1, t2))
        t_exit = min(t_exit, max(t1, t2))
    if t_exit >= 0.0 and t_enter <= t_exit:
        return t_exit
    return np.inf


def cast_fan_reference(arena: Arena, origin: Point, angles: np.ndarray, max_range: float
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Plain numpy twin of :func:`cast_fan`, kept as a cross-check."""
    geo = arena._geometry
    ox, oy = origin
    dx = np.cos(angles)
    dy = np.sin(angles)
    n = angles.shape[0]
    best = np.full(n, np.inf)
    cls = np.zeros(n, np.int64)

    if geo.segs.shape[0]:
        x0, y0, x1, y1 = geo.segs.T
        ex, ey = x1 - x0, y1 - y0
        wx, wy = x0 - ox, y0 - oy
        denom = dx[:, None] * ey[None, :] - dy[:, None] * ex[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (wx * ey - wy * ex)[None, :] / denom
            s = (wx[None, :] * dy[:, None] - wy[None, :] * dx[:, None]) / denom
        ok = (denom != 0) & (t >= 0) & (s >= 0) & (s <= 1)
        t = np.where(ok, t, np.inf)
        j = np.argmin(t, axis=1)
        tmin = t[np.arange(n), j]
        better = tmin < best
        best = np.where(better, tmin, best)
        cls = np.where(better, geo.seg_cls[j], cls)

    if geo.circles.shape[0]:
        cx, cy, r = geo.circles.T
        wx, wy = cx - ox, cy - oy
        b = dx[:, None] * wx[None, :] + dy[:, None] * wy[None, :]
        c = (wx * wx + wy * wy - r * r)[None, :]
        disc = b * b - c
        with np.errstate(invalid="ignore"):
            sq = np.sqrt(disc)
        far = b + sq
        t = np.where((disc >= 0) & (far >= 0), np.maximum(b - sq, 0.0), np.inf)
        j = np.argmin(t, axis=1)
        tmin = t[np.arange(n), j]
        better = tmin < best
        best = np.where(better, tmin, best)
        cls = np.where(better, geo.circ_cls[j], cls)

    miss = best > max_range
    best[miss] = np.inf
    cls[miss] = int(SurfaceClass.NONE)

    fence = _exit_distance(arena.mission_half, ox, oy, dx, dy)
    fence[fence > max_range] = np.inf
    return best, cls, fence


def _exit_distance(h: float, ox: float, oy: float, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Distance along each ray to where it leaves the square [-h, h]^2.

    One-sided: a ray starting outside that never enters the square, or is
    heading away from it, has no exit.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        tx1 = (-h - ox) / dx
        tx2 = (h - ox) / dx
        ty1 = (-h - oy) / dy
        ty2 = (h - oy) / dy
    inside_x = (-h <= ox <= h)
    inside_y = (-h <= oy <= h)
    tx_near = np.where(dx == 0, -np.inf if inside_x else np.inf, np.minimum(tx1, tx2))
    tx_far = np.where(dx == 0, np.inf if inside_x else -np.inf, np.maximum(tx1, tx2))
    ty_near = np.where(dy == 0, -np.inf if inside_y else np.inf, np.minimum(ty1, ty2))
    ty_far = np.where(dy == 0, np.inf if inside_y else -np.inf, np.maximum(ty1, ty2))
    t_enter = np.maximum(tx_near, ty_near)
    t_exit = np.minimum(tx_far, ty_far)
    ok = (t_exit >= 0) & (t_enter <= t_exit)
    return np.where(ok, t_exit, np.inf)


def ray_cast(arena: Arena, origin: Point, angle: float, max_range: float,
             ground_aware: bool = False) -> Hit:
    if not max_range > 0:
        raise ValueError("max_range must be > 0")
    d, c, fence = cast_fan(arena, origin, np.array([angle], float), max_range)
    dist, cls = float(d[0]), SurfaceClass(int(c[0]))
    if ground_aware and fence[0] < dist:
        dist, cls = float(fence[0]), SurfaceClass.OUT_OF_AREA_GROUND
    return Hit(dist, cls)


def clearance(arena: Arena, p: Point) -> float:
    """Distance from ``p`` to the nearest obstacle surface or outer wall."""
    geo = arena._geometry
    h = arena.outer_half
    best = min(h - p[0], h + p[0], h - p[1], h + p[1])
    if geo.capsules.shape[0]:
        d = _point_capsule_dist(np.asarray(p, float), geo.capsules)
        best = min(best, float(d.min()))
    return best


def _point_capsule_dist(p: np.ndarray, caps: np.ndarray) -> np.ndarray:
    a = caps[:, 0:2]
    b = caps[:, 2:4]
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(L2 > 0, np.einsum("ij,ij->i", p - a, ab) / L2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[:, None] * ab
    return np.hypot(p[0] - q[:, 0], p[1] - q[:, 1]) - caps[:, 4]


def _seg_seg_dist(a0, a1, b0, b1) -> float:
    if _segments_intersect(a0, a1, b0, b1):
        return 0.0
    return min(_pt_seg_dist(a0, b0, b1), _pt_seg_dist(a1, b0, b1),
               _pt_seg_dist(b0, a0, a1), _pt_seg_dist(b1, a0, a1))


def _pt_seg_dist(p, a, b) -> float:
    abx, aby = b[0] - a[0], b[1] - a[1]
    L2 = abx * abx + aby * aby
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / L2))
    return math.hypot(p[0] - a[0] - t * abx, p[1] - a[1] - t * aby)


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_intersect(a0, a1, b0, b1) -> bool:
    d1, d2 = _orient(b0, b1, a0), _orient(b0, b1, a1)
    d3, d4 = _orient(a0, a1, b0), _orient(a0, a1, b1)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True
    for d, p, q, r in ((d1, b0, b1, a0), (d2, b0, b1, a1), (d3, a0, a1, b0), (d4, a0, a1, b1)):
        if d == 0 and min(p[0], q[0]) <= r[0] <= max(p[0], q[0]) and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]):
            return True
    return False


def _as_capsule(shape: Shape) -> tuple[Point, Point, float]:
    if isinstance(shape, Circle):
        return shape.center, shape.center, shape.radius
    return shape.p0, shape.p1, shape.thickness / 2


def shape_distance(a: Shape, b: Shape) -> float:
    """Gap between two shapes, treating segments as capsules (<= 0 means overlap)."""
    a0, a1, ra = _as_capsule(a)
    b0, b1, rb = _as_capsule(b)
    return _seg_seg_dist(a0, a1, b0, b1) - ra - rb


def point_shape_distance(p: Point, s: Shape) -> float:
    a0, a1, r = _as_capsule(s)
    return _pt_seg_dist(p, a0, a1) - r


def _shape_inside(s: Shape, half: float) -> bool:
    a0, a1, r = _as_capsule(s)
    return all(-half <= c + sgn * r <= half for q in (a0, a1) for c in q for sgn in (-1, 1))


# --------------------------------------------------------------------------
# gates


def gate_pass(gate: Gate, p_prev: Point, p_next: Point) -> bool:
    """True iff the motion ``p_prev -> p_next`` crosses the gate opening.

    A point on the opening line counts as being on its "positive" side, so a
    crossing is registered exactly once and the test is symmetric in its
    endpoints.
    """
    a, b = gate.opening
    o1 = _orient(a, b, p_prev)
    o2 = _orient(a, b, p_next)
    if (o1 >= 0) == (o2 >= 0):
        return False
    # parameter of the crossing point along the opening
    mx, my = p_next[0] - p_prev[0], p_next[1] - p_prev[1]
    ex, ey = b[0] - a[0], b[1] - a[1]
    denom = ex * my - ey * mx
    if denom == 0:
        return False
    s = ((p_prev[0] - a[0]) * my - (p_prev[1] - a[1]) * mx) / denom
    return 0.0 <= s <= 1.0


# --------------------------------------------------------------------------
# dynamic obstacles


def _relocated(ob: Obstacle, arena: Arena, rng: np.random.Generator) -> Obstacle:
    h = arena.mission_half
    s = ob.shape
    if isinstance(s, Circle):
        c = (rng.uniform(-h, h), rng.uniform(-h, h))
        return replace(ob, shape=Circle(c, s.radius))
    c = (rng.uniform(-h, h), rng.uniform(-h, h))
    ang = rng.uniform(-math.pi, math.pi)
    hx, hy = math.cos(ang) * s.length / 2, math.sin(ang) * s.length / 2
    return replace(ob, shape=Segment((c[0] - hx, c[1] - hy), (c[0] + hx, c[1] + hy), s.thickness))


def _placement_ok(cand: Obstacle, others: Sequence[Obstacle], arena: Arena,
                  keep_clear: Sequence[Point], clearance_m: float, gap: float) -> bool:
    if not _shape_inside(cand.shape, arena.mission_half):
        return False
    if any(point_shape_distance(p, cand.shape) < clearance_m for p in keep_clear):
        return False
    return all(shape_distance(cand.shape, o.shape) > gap for o in others)


def move_dynamic_obstacle(arena: Arena, rng: np.random.Generator, drone_pos: Point | None = None,
                          clearance_m: float = 1.0, gap: float = 0.0,
                          max_attempts: int = 1000) -> tuple[Arena, int]:
    """Relocate one movable obstacle, chosen uniformly at random.

    Returns the new arena and the index (into ``arena.obstacles``) of the
    obstacle that moved. Raises PlacementError if no movable obstacle exists
    or no valid pose is found within ``max_attempts`` draws.
    """
    movable = [i for i, o in enumerate(arena.obstacles) if o.movable]
    if not movable:
        raise PlacementError("NO_MOVABLE", "arena has no movable obstacle")
    k = movable[int(rng.integers(len(movable)))]
    others = [o for i, o in enumerate(arena.all_obstacles()) if i != k]
    keep = [drone_pos] if drone_pos is not None else []
    for _ in range(max_attempts):
        cand = _relocated(arena.obstacles[k], arena, rng)
        if _placement_ok(cand, others, arena, keep, clearance_m, gap):
            obs = list(arena.obstacles)
            obs[k] = cand
            return replace(arena, obstacles=tuple(obs)), k
    raise PlacementError("EXHAUSTED", f"no valid pose after {max_attempts} attempts")


def randomize_layout(arena: Arena, rng: np.random.Generator, keep_clear: Sequence[Point] = (),
                     clearance_m: float = 1.0, gap: float = 0.3,
                     max_attempts: int = 1000) -> Arena:
    """Place every movable obstacle afresh, one after the other."""
    fixed = [o for o in arena.all_obstacles() if not o.movable]
    placed: list[Obstacle] = []
    new_obs = list(arena.obstacles)
    for i, ob in enumerate(arena.obstacles):
        if not ob.movable:
            continue
        for _ in range(max_attempts):
            cand = _relocated(ob, arena, rng)
            if _placement_ok(cand, fixed + placed, arena, keep_clear, clearance_m, gap):
                break
        else:
            raise PlacementError("EXHAUSTED", f"could not place {ob.name or i}")
        placed.append(cand)
        new_obs[i] = cand
    return replace(arena, obstacles=tuple(new_obs))


# --------------------------------------------------------------------------
# JSON layout


def _shape_from_json(d: dict) -> Shape:
    p = d["params"]
    if d["type"] == "circle":
        return Circle(tuple(p["center"]), float(p["radius"]))
    return Segment(tuple(p["p0"]), tuple(p["p1"]), float(p.get("thickness", 0.0)))


def arena_from_json(doc: dict) -> Arena:
    """Build an arena from a layout document (validated against ``arena.schema.json``)."""
    from .config import validate

    validate(doc, "arena")
    cfg = ArenaConfig(outer=float(doc.get("outer", 10.0)), mission=float(doc.get("mission", 8.0)),
                      wp_half_side=float(doc.get("wp_half_side", 3.0)))
    if "obstacles" in doc:
        cfg.obstacles = [
            Obstacle(_shape_from_json(o), bool(o.get("movable", False)),
                     SurfaceClass[o.get("surface_class", "OBSTACLE")], o.get("name", ""))
            for o in doc["obstacles"]
        ]
    if "gates" in doc:
        cfg.gates = [
            make_gate(tuple(g["center"]), float(g.get("angle", 0.0)), float(g.get("opening", 1.0)),
                      float(g.get("post_length", 0.1)), float(g.get("thickness", 0.05)),
                      g.get("name", ""))
            for g in doc["gates"]
        ]
    return build_arena(cfg)


def arena_to_json(arena: Arena) -> dict:
    def shape(s: Shape) -> dict:
        if isinstance(s, Circle):
            return {"type": "circle", "params": {"center": list(s.center), "radius": s.radius}}
        return {"type": "segment",
                "params": {"p0": list(s.p0), "p1": list(s.p1), "thickness": s.thickness}}

    gates = []
    for g in arena.gates:
        (ax, ay), (bx, by) = g.opening
        post = g.posts[0].shape
        gates.append({"center": list(g.center), "angle": math.atan2(by - ay, bx - ax),
                      "opening": math.hypot(bx - ax, by - ay),
                      "post_length": post.length if isinstance(post, Segment) else 0.1,
                      "thickness": post.thickness if isinstance(post, Segment) else 0.05,
                      "name": g.name})
    return {
        "outer": 2 * arena.outer_half,
        "mission": 2 * arena.mission_half,
        "wp_half_side": arena.wp_half,
        "obstacles": [dict(shape(o.shape), movable=o.movable,
                           surface_class=o.surface_class.name, name=o.name)
                      for o in arena.obstacles],
        "gates": gates,
    }
