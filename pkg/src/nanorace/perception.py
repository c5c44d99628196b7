"""Geometric stand-in for the collision CNN.

Three-sector collision labels/probabilities from ray casts, the same rule
applied to depth/segmentation rasters, 8-bit quantisation and the UART frame
that carries the three probabilities from the vision chip to the flight MCU.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .arena import Arena, SurfaceClass, cast_fan

OBSTACLE_CODES = (int(SurfaceClass.OBSTACLE), int(SurfaceClass.GATE_FRAME), int(SurfaceClass.WALL))

FRAME_HEADER = 0xAA
FRAME_LEN = 5


class SectorProbs(NamedTuple):
    left: float
    center: float
    right: float


class SectorProbsQ8(NamedTuple):
    left: int
    center: int
    right: int


class FrameError(ValueError):
    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code  # BAD_HEADER | BAD_CHECKSUM | SHORT_FRAME | LONG_FRAME


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SensorGeometry:
    fov: float = math.radians(87.0)
    n_rays: int = 162
    d_max: float = 2.0
    fraction: float = 0.10

    def __post_init__(self):
        if self.n_rays < 3 or self.n_rays % 3:
            raise ValueError("n_rays must be >= 3 and divisible by 3")
        if not 0 < self.fov < math.pi:
            raise ValueError("fov must lie in (0, pi)")
        if not self.d_max > 0:
            raise ValueError("d_max must be > 0")
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")

    def bearings(self) -> np.ndarray:
        """Ray bearings relative to the heading, one per image column, left first."""
        n = self.n_rays
        i = np.arange(n)
        return self.fov / 2 - (i + 0.5) * self.fov / n


def min_count(fraction: float, n: int) -> int:
    """Smallest k with k / n >= fraction (the inclusive pixel/ray count rule)."""
    k = max(1, math.ceil(fraction * n))
    # guard against ceil landing one off through float rounding
    while k > 1 and (k - 1) / n >= fraction:
        k -= 1
    while k / n < fraction:
        k += 1
    return k


# --------------------------------------------------------------------------
# ray-based oracle


def obstacle_distances(arena: Arena, pose: tuple[float, float, float], geom: SensorGeometry,
                       ground_aware: bool) -> np.ndarray:
    """Per-ray distance to the nearest obstacle-class surface (inf if none within d_max)."""
    x, y, yaw = pose
    angles = yaw + geom.bearings()
    dist, cls, fence = cast_fan(arena, (x, y), angles, geom.d_max)
    # every physical surface in the arena is obstacle-class; ground never is
    d = np.where(np.isin(cls, OBSTACLE_CODES), dist, np.inf)
    if ground_aware:
        d = np.minimum(d, fence)
    return d


def labels_from_distances(d: np.ndarray, geom: SensorGeometry) -> tuple[int, int, int]:
    sectors = d.reshape(3, -1)
    n = sectors.shape[1]
    hits = np.count_nonzero(sectors <= geom.d_max, axis=1)
    return tuple(int(h / n >= geom.fraction) for h in hits)


def probs_from_distances(d: np.ndarray, geom: SensorGeometry) -> SectorProbs:
    sectors = d.reshape(3, -1)
    k = min_count(geom.fraction, sectors.shape[1]) - 1
    d_f = np.partition(sectors, k, axis=1)[:, k]
    p = np.clip(1.0 - d_f / geom.d_max, 0.0, 1.0)
    return SectorProbs(float(p[0]), float(p[1]), float(p[2]))


def sector_labels(arena: Arena, pose, geom: SensorGeometry = SensorGeometry(),
                  ground_aware: bool = False) -> tuple[int, int, int]:
    return labels_from_distances(obstacle_distances(arena, pose, geom, ground_aware), geom)


def sector_soft_probs(arena: Arena, pose, geom: SensorGeometry = SensorGeometry(),
                      ground_aware: bool = False) -> SectorProbs:
    """Graded collision probability per sector.

    Uses the nearest-rank ``fraction``-quantile of the per-ray obstacle
    distances, mapped linearly from 1 at contact to 0 at ``d_max``.
    """
    return probs_from_distances(obstacle_distances(arena, pose, geom, ground_aware), geom)


# --------------------------------------------------------------------------
# raster labelling


def label_from_rasters(depth: np.ndarray, seg: np.ndarray, geom: SensorGeometry = SensorGeometry(),
                       ground_aware: bool = False) -> tuple[int, int, int]:
    """Dataset labelling rule on a depth (metres) + segmentation (class codes) pair."""
    depth = np.asarray(depth)
    seg = np.asarray(seg)
    if depth.shape != seg.shape or depth.ndim != 2:
        raise DimensionMismatch(f"depth {depth.shape} and seg {seg.shape} must be equal 2D shapes")
    h, w = depth.shape
    if w % 3:
        raise DimensionMismatch(f"raster width {w} is not divisible by 3")
    codes = OBSTACLE_CODES + ((int(SurfaceClass.OUT_OF_AREA_GROUND),) if ground_aware else ())
    near = np.isin(seg, codes) & (depth <= geom.d_max)
    third = w // 3
    total = third * h
    out = []
    for s in range(3):
        count = int(np.count_nonzero(near[:, s * third:(s + 1) * third]))
        out.append(int(count / total >= geom.fraction))
    return tuple(out)


def depth_from_millimetres(raw: np.ndarray) -> np.ndarray:
    return np.asarray(raw, float) / 1000.0


# --------------------------------------------------------------------------
# quantisation and wire format


def _q(p: float) -> int:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    # round half away from zero (p >= 0)
    return int(math.floor(p * 255 + 0.5))


def quantize(p: SectorProbs) -> SectorProbsQ8:
    return SectorProbsQ8(_q(p[0]), _q(p[1]), _q(p[2]))


def dequantize(q: SectorProbsQ8) -> SectorProbs:
    for v in q:
        if not 0 <= v <= 255:
            raise ValueError(f"code {v} outside [0, 255]")
    return SectorProbs(q[0] / 255, q[1] / 255, q[2] / 255)


def encode_frame(q: SectorProbsQ8) -> bytes:
    l, c, r = q
    return bytes((FRAME_HEADER, l, c, r, l ^ c ^ r))


def decode_frame(frame: bytes) -> SectorProbsQ8:
    if len(frame) < FRAME_LEN:
        raise FrameError("SHORT_FRAME", f"{len(frame)} bytes")
    if len(frame) > FRAME_LEN:
        raise FrameError("LONG_FRAME", f"{len(frame)} bytes")
    if frame[0] != FRAME_HEADER:
        raise FrameError("BAD_HEADER", f"0x{frame[0]:02X}")
    l, c, r, cs = frame[1], frame[2], frame[3], frame[4]
    if l ^ c ^ r != cs:
        raise FrameError("BAD_CHECKSUM")
    return SectorProbsQ8(l, c, r)


def wire_roundtrip(p: SectorProbs) -> SectorProbs:
    """What the flight MCU sees: quantise, frame, unframe, dequantise."""
    return dequantize(decode_frame(encode_frame(quantize(p))))


def perception_noise(p: SectorProbs, sigma: float, rng: np.random.Generator) -> SectorProbs:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return SectorProbs(*p)
    z = rng.normal(0.0, sigma, 3)
    return SectorProbs(*(min(1.0, max(0.0, v + dz)) for v, dz in zip(p, z)))
