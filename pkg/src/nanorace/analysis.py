"""Dead-reckoning error model fitting and the Monte Carlo safety-margin study.

A nominal square lap is corrupted many times with the per-sqrt-second drift
model; each realization's worst excursion beyond the nominal bounding box is
its minimum safety margin.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .perception import min_count
from .policy import wrap_angle
from .vehicle import ErrorModel


class AnalysisError(ValueError):
    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code


@dataclass(frozen=True)
class PosePairWindow:
    truth: tuple[float, float, float]  # (dx, dy, dyaw) over the window
    odom: tuple[float, float, float]
    length: float = 10.0  # s

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("window length must be > 0")

    def error(self) -> tuple[float, float, float]:
        return (self.odom[0] - self.truth[0], self.odom[1] - self.truth[1],
                wrap_angle(self.odom[2] - self.truth[2]))


@dataclass(frozen=True)
class BBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate box {self}")


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled planar pose series."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yaw: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    @classmethod
    def from_array(cls, a: np.ndarray) -> "Trajectory":
        a = np.asarray(a, float)
        return cls(a[:, 0], a[:, 1], a[:, 2], a[:, 3])

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.t, self.x, self.y, self.yaw])


def fit_error_model(windows: Sequence[PosePairWindow]) -> ErrorModel:
    """Zero-mean Gaussian fit per axis, rescaled to one-second units.

    Each window's error variance is divided by its length before pooling,
    so windows of unequal length are combined on the same per-second scale.
    """
    if len(windows) < 2:
        raise AnalysisError("INSUFFICIENT_DATA", f"need >= 2 windows, got {len(windows)}")
    e = np.array([w.error() for w in windows])
    lengths = np.array([w.length for w in windows])
    var = (e ** 2 / lengths[:, None]).mean(axis=0)
    sx, sy, syaw = np.sqrt(var)
    return ErrorModel(float(sx), float(sy), float(syaw))


def nominal_square_trajectory(half: float = 3.0, speed: float = 1.0, laps: int = 8,
                              dt: float = 0.05, alternate: bool = True) -> Trajectory:
    """Constant-speed laps of the square [-half, half]^2 starting at its lower-left corner.

    With ``alternate`` set, odd laps run counterclockwise and even laps clockwise.
    """
    ccw = [(-half, -half), (half, -half), (half, half), (-half, half), (-half, -half)]
    cw = ccw[::-1]
    corners = [ccw[0]]
    for lap in range(laps):
        path = cw if alternate and lap % 2 else ccw
        corners.extend(path[1:])
    corners = np.array(corners, float)
    seg = np.hypot(*np.diff(corners, axis=0).T)
    s_knots = np.concatenate([[0.0], np.cumsum(seg)])
    total = s_knots[-1]
    n = int(math.floor(total / (speed * dt) + 1e-9)) + 1
    t = np.arange(n) * dt
    s = np.minimum(t * speed, total)
    x = np.interp(s, s_knots, corners[:, 0])
    y = np.interp(s, s_knots, corners[:, 1])
    heading = np.arctan2(*np.diff(corners, axis=0)[:, ::-1].T)
    idx = np.clip(np.searchsorted(s_knots, s, side="right") - 1, 0, len(seg) - 1)
    return Trajectory(t, x, y, heading[idx])


def _wrap(a: np.ndarray) -> np.ndarray:
    w = np.mod(a + math.pi, 2 * math.pi) - math.pi
    return np.where(w == -math.pi, math.pi, w)


def _noise(n_steps: int, rng: np.random.Generator) -> np.ndarray:
    # one (x, y, yaw) triple per step, the same draw order as vehicle.estimate_step
    return rng.standard_normal((n_steps, 3))


def _corrupt(nom: Trajectory, m: ErrorModel, z: np.ndarray) -> Trajectory:
    dt = nom.dt
    sq = math.sqrt(dt)
    dyaw = m.sigma_yaw * sq * z[:, 2] + m.bias_yaw * dt
    delta = np.concatenate([[0.0], np.cumsum(dyaw)])  # heading error after each step
    dx = np.diff(nom.x)
    dy = np.diff(nom.y)
    c, s = np.cos(delta[1:]), np.sin(delta[1:])
    # estimated increment = nominal increment rotated by the current heading error
    ex = (c - 1.0) * dx - s * dy + m.sigma_x * sq * z[:, 0] + m.bias_x * dt
    ey = s * dx + (c - 1.0) * dy + m.sigma_y * sq * z[:, 1] + m.bias_y * dt
    err_x = np.concatenate([[0.0], np.cumsum(ex)])
    err_y = np.concatenate([[0.0], np.cumsum(ey)])
    yaw = _wrap(nom.yaw + delta) if m.sigma_yaw or m.bias_yaw else nom.yaw
    return Trajectory(nom.t, nom.x + err_x, nom.y + err_y, yaw)


def corrupt_trajectory(nominal: Trajectory, m: ErrorModel, seed: int | np.random.SeedSequence = 0
                       ) -> Trajectory:
    """Dead-reckoned version of ``nominal`` under drift model ``m``.

    Every step adds N(0, sigma^2 dt) per axis; accumulated heading error
    rotates all later increments.
    """
    if len(nominal) < 2:
        return nominal
    t = np.diff(nominal.t)
    if not np.allclose(t, t[0], rtol=1e-9, atol=1e-12):
        raise ValueError("nominal trajectory must have a uniform time step")
    rng = np.random.default_rng(seed)
    return _corrupt(nominal, m, _noise(len(nominal) - 1, rng))


def reference_bbox(trajs: Sequence[Trajectory]) -> BBox:
    trajs = [tr for tr in trajs if len(tr)]
    if not trajs:
        raise AnalysisError("EMPTY_INPUT", "no trajectory points")
    xs = np.concatenate([tr.x for tr in trajs])
    ys = np.concatenate([tr.y for tr in trajs])
    return BBox(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))


def exterior_distance(x, y, box: BBox, metric: str = "linf") -> np.ndarray:
    """Per-point distance outside ``box`` (0 inside)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ox = np.maximum(np.maximum(box.xmin - x, x - box.xmax), 0.0)
    oy = np.maximum(np.maximum(box.ymin - y, y - box.ymax), 0.0)
    if metric == "linf":
        return np.maximum(ox, oy)
    if metric == "l2":
        return np.hypot(ox, oy)
    raise ValueError(f"unknown metric {metric!r}")


def min_safety_margin(traj: Trajectory, box: BBox, metric: str = "linf") -> float:
    if not len(traj):
        return 0.0
    return float(exterior_distance(traj.x, traj.y, box, metric).max())


def nearest_rank(values, q: float) -> float:
    """Nearest-rank quantile: the smallest sample with at least a fraction ``q`` at or below it."""
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    v = np.sort(np.asarray(values, float))
    if not len(v):
        raise AnalysisError("EMPTY_INPUT", "quantile of an empty sample")
    k = min_count(q, len(v)) if q > 0 else 1
    return float(v[k - 1])


@dataclass
class MarginStats:
    margins: np.ndarray
    thresholds: tuple[float, ...]
    _time_outside: dict[float, np.ndarray] = field(repr=False)
    _crossings: dict[float, np.ndarray] = field(repr=False)
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)

    def fraction_within(self, threshold: float) -> float:
        return float(np.mean(self.margins <= threshold))

    def time_outside(self, threshold: float) -> np.ndarray:
        return self._lookup(self._time_outside, threshold)

    def crossings(self, threshold: float) -> np.ndarray:
        return self._lookup(self._crossings, threshold)

    def quantile(self, q: float) -> float:
        return nearest_rank(self.margins, q)

    @property
    def median(self) -> float:
        return self.quantile(0.5)

    def _lookup(self, table, threshold):
        try:
            return table[float(threshold)]
        except KeyError:
            raise KeyError(f"threshold {threshold} not evaluated; study ran with {self.thresholds}"
                           ) from None

    def summary(self) -> dict:
        out = {"n": int(len(self.margins)), "median": self.median,
               "p05": self.quantile(0.05), "p95": self.quantile(0.95),
               "max": float(self.margins.max())}
        for th in self.thresholds:
            out[f"fraction_within_{th:g}"] = self.fraction_within(th)
            out[f"median_time_outside_{th:g}"] = nearest_rank(self.time_outside(th), 0.5)
        return out


def _realization(args):
    nominal, m, ss, box, thresholds, metric, keep = args
    rng = np.random.default_rng(ss)
    tr = _corrupt(nominal, m, _noise(len(nominal) - 1, rng))
    ext = exterior_distance(tr.x, tr.y, box, metric)
    dt = nominal.dt
    t_out = []
    cross = []
    for th in thresholds:
        out = ext > th
        t_out.append(dt * int(np.count_nonzero(out)))
        cross.append(int(np.count_nonzero(out[1:] != out[:-1])))
    return float(ext.max()), t_out, cross, tr if keep else None


def margin_study(nominal: Trajectory, m: ErrorModel, n: int = 1024, seed: int = 0,
                 box: BBox | None = None, thresholds: Sequence[float] = (1.0, 2.0),
                 metric: str = "linf", keep: int = 0, workers: int = 1) -> MarginStats:
    """Monte Carlo distribution of the minimum safety margin.

    Realization ``i`` draws from the ``i``-th child of ``SeedSequence(seed)``,
    so results do not depend on ``workers``. ``keep`` retains the first few
    corrupted trajectories for plotting.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(nominal) < 2:
        raise ValueError("nominal trajectory needs at least two samples")
    box = box or reference_bbox([nominal])
    thresholds = tuple(float(t) for t in thresholds)
    children = np.random.SeedSequence(seed).spawn(n)
    jobs = [(nominal, m, ss, box, thresholds, metric, i < keep) for i, ss in enumerate(children)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_realization, jobs, chunksize=max(1, n // (4 * workers))))
    else:
        results = [_realization(j) for j in jobs]
    margins = np.array([r[0] for r in results])
    t_out = {th: np.array([r[1][i] for r in results]) for i, th in enumerate(thresholds)}
    cross = {th: np.array([r[2][i] for r in results]) for i, th in enumerate(thresholds)}
    return MarginStats(margins, thresholds, t_out, cross, [r[3] for r in results[:keep]])
