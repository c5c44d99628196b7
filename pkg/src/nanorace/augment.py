"""Photometric augmentation for grayscale frames.

Stages run in a fixed order: motion blur, Gaussian blur, exposure with
vignetting, then sensor noise. Images are (height, width) uint8 arrays.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class MotionBlur:
    length: float = 0.0  # px
    angle: float = 0.0  # rad

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("motion blur length must be >= 0")


@dataclass(frozen=True)
class GaussianBlur:
    sigma: float = 0.0  # px

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("blur sigma must be >= 0")


@dataclass(frozen=True)
class Noise:
    sigma: float = 0.0  # intensity units

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise sigma must be >= 0")


@dataclass(frozen=True)
class Exposure:
    gain: float = 1.0
    gamma: float = 1.0
    range: tuple[float, float] = (0.0, 255.0)
    vignette_strength: float = 0.0

    def __post_init__(self):
        if not self.gain > 0 or not self.gamma > 0:
            raise ValueError("gain and gamma must be > 0")
        lo, hi = self.range
        if not lo < hi:
            raise ValueError("exposure range needs lo < hi")
        if not 0 <= self.vignette_strength <= 1:
            raise ValueError("vignette_strength must lie in [0, 1]")


@dataclass(frozen=True)
class AugParams:
    motion_blur: MotionBlur = field(default_factory=MotionBlur)
    gaussian_blur: GaussianBlur = field(default_factory=GaussianBlur)
    noise: Noise = field(default_factory=Noise)
    exposure: Exposure = field(default_factory=Exposure)

    @classmethod
    def from_json(cls, doc: dict) -> "AugParams":
        from .config import validate

        validate(doc, "augment")
        exp = dict(doc.get("exposure", {}))
        if "range" in exp:
            exp["range"] = tuple(exp["range"])
        return cls(MotionBlur(**doc.get("motion_blur", {})),
                   GaussianBlur(**doc.get("gaussian_blur", {})),
                   Noise(**doc.get("noise", {})),
                   Exposure(**exp))

    def to_json(self) -> dict:
        d = asdict(self)
        d["exposure"]["range"] = list(self.exposure.range)
        return d


def motion_kernel(length: float, angle: float) -> np.ndarray:
    """Normalised line kernel of ``length`` px through the centre at ``angle``.

    The line is sampled densely and splatted bilinearly, so fractional
    lengths and arbitrary angles give smooth weights.
    """
    r = math.ceil(length / 2) + 1
    k = np.zeros((2 * r + 1, 2 * r + 1))
    n = max(2, int(math.ceil(length * 8)) + 1)
    s = np.linspace(-length / 2, length / 2, n)
    # image rows grow downwards, so a positive angle tilts the line up
    xs = r + s * math.cos(angle)
    ys = r - s * math.sin(angle)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    fx = xs - x0
    fy = ys - y0
    for dx, dy, w in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                      (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        np.add.at(k, (y0 + dy, x0 + dx), w)
    return k / k.sum()


def gaussian_kernel(sigma: float) -> np.ndarray:
    r = math.ceil(3 * sigma)
    x = np.arange(-r, r + 1, dtype=float)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def motion_blur(img: np.ndarray, length: float, angle: float) -> np.ndarray:
    if length == 0:
        return img
    return ndimage.correlate(img, motion_kernel(length, angle), mode="nearest")


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0:
        return img
    g = gaussian_kernel(sigma)
    out = ndimage.correlate1d(img, g, axis=0, mode="nearest")
    return ndimage.correlate1d(out, g, axis=1, mode="nearest")


def vignette(shape: tuple[int, int], strength: float) -> np.ndarray:
    h, w = shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    d_max = math.hypot(cx, cy) or 1.0
    yy, xx = np.mgrid[0:h, 0:w]
    d = np.hypot(xx - cx, yy - cy)
    return 1.0 - strength * (d / d_max) ** 2


def exposure(img: np.ndarray, e: Exposure) -> np.ndarray:
    lo, hi = e.range
    out = lo + (hi - lo) * (e.gain * img / 255.0) ** e.gamma
    if e.vignette_strength:
        out = out * vignette(img.shape, e.vignette_strength)
    return out


def to_uint8(img: np.ndarray) -> np.ndarray:
    # round half up, then clamp
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def augment(img: np.ndarray, p: AugParams, seed: int = 0) -> np.ndarray:
    x = np.asarray(img, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2D grayscale image")
    x = motion_blur(x, p.motion_blur.length, p.motion_blur.angle)
    x = gaussian_blur(x, p.gaussian_blur.sigma)
    x = exposure(x, p.exposure)
    if p.noise.sigma > 0:
        x = x + np.random.default_rng(seed).normal(0.0, p.noise.sigma, x.shape)
    return to_uint8(x)


def resize_gray(img: np.ndarray, out_w: int = 162, out_h: int = 162) -> np.ndarray:
    """Bilinear resize with pixel centres at half-integer coordinates."""
    img = np.asarray(img)
    h, w = img.shape
    if min(h, w, out_w, out_h) <= 0:
        raise ValueError("image dimensions must be positive")
    if (out_h, out_w) == (h, w):
        return img.copy()

    def coords(n_out, n_in):
        c = np.clip((np.arange(n_out) + 0.5) * n_in / n_out - 0.5, 0, n_in - 1)
        i0 = np.floor(c).astype(int)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, c - i0

    y0, y1, fy = coords(out_h, h)
    x0, x1, fx = coords(out_w, w)
    a = img.astype(float)
    top = a[y0][:, x0] * (1 - fx) + a[y0][:, x1] * fx
    bot = a[y1][:, x0] * (1 - fx) + a[y1][:, x1] * fx
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    hi = np.iinfo(img.dtype).max if np.issubdtype(img.dtype, np.integer) else None
    if hi is None:
        return out
    return np.clip(np.floor(out + 0.5), 0, hi).astype(img.dtype)
