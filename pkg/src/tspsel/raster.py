"""Point-set normalization, density-map rasterization, and augmentation.

Pipeline: normalize -> rasterize -> upscale, with optional rotation and
mirror flips beforehand.  All transforms act on coordinates, never on pixel
values, so the pixel sum always equals the point count.

Normalized coordinates are snapped to multiples of 2**-44 (error <= 2**-45,
four orders below every stated tolerance).  On that grid ``1 - x`` is exact,
which makes the mirror flips true involutions in floating point.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateInputError, DomainError, ShapeError

_QUANT = 2.0**44


@dataclass(frozen=True)
class RasterConfig:
    """Gridding parameters: c cells per side, then k-fold nearest-neighbor upscale."""

    c: int = 64
    upscale: int = 1
    normalize_mode: str = "isotropic"

    @property
    def side(self) -> int:
        return self.c * self.upscale

    def validate(self) -> None:
        if self.c < 1 or self.upscale < 1:
            raise ConfigError(f"c and upscale must be >= 1, got c={self.c} k={self.upscale}")
        if self.normalize_mode not in ("isotropic", "per_axis"):
            raise ConfigError(f"unknown normalize mode {self.normalize_mode!r}")


@dataclass(frozen=True)
class AugmentConfig:
    """Random rotation from d evenly spaced angles plus independent mirror flips."""

    d: int = 0
    flip: bool = False

    def validate(self) -> None:
        if self.d < 0:
            raise ConfigError(f"rotation divisor must be >= 0, got {self.d}")


@dataclass
class DensityMap:
    """c x c grid of point counts; row index grows with y."""

    pixels: np.ndarray  # (c, c) int64
    c: int
    n: int


def _as_points(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError(f"points must be (n, 2), got {pts.shape}")
    return pts


def _snap(pts: np.ndarray) -> np.ndarray:
    return np.round(pts * _QUANT) / _QUANT


def normalize(points: np.ndarray, mode: str = "isotropic") -> np.ndarray:
    """Map a point set into the unit square.

    isotropic: one scale for both axes (the larger extent), shorter axis
    centered; preserves the aspect ratio.  per_axis: classic min-max per
    coordinate.  A zero-extent axis maps to 0.5; zero extent on both axes
    has no defined scale and raises.
    """
    pts = _as_points(points)
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must be finite")
    mins = pts.min(axis=0)
    ranges = pts.max(axis=0) - mins
    if ranges[0] == 0.0 and ranges[1] == 0.0:
        raise DegenerateInputError("all points identical; no extent to normalize")
    if mode == "isotropic":
        s = ranges.max()
        out = (pts - mins) / s + (1.0 - ranges / s) / 2.0
    elif mode == "per_axis":
        safe = np.where(ranges > 0.0, ranges, 1.0)
        out = np.where(ranges > 0.0, (pts - mins) / safe, 0.5)
    else:
        raise ConfigError(f"unknown normalize mode {mode!r}")
    return _snap(out)


def rasterize(points: np.ndarray, c: int) -> DensityMap:
    """Count points per grid cell; cell = min(floor(coord * c), c - 1)."""
    if c < 1:
        raise DomainError(f"c must be >= 1, got {c}")
    pts = _as_points(points)
    if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise DomainError("rasterize expects coordinates in [0, 1]")
    ix = np.minimum(np.floor(pts[:, 0] * c).astype(np.int64), c - 1)
    iy = np.minimum(np.floor(pts[:, 1] * c).astype(np.int64), c - 1)
    pixels = np.zeros((c, c), dtype=np.int64)
    np.add.at(pixels, (iy, ix), 1)
    return DensityMap(pixels=pixels, c=c, n=len(pts))


def upscale(pixels: np.ndarray, k: int) -> np.ndarray:
    """Nearest-neighbor upscale: each cell becomes a k x k block."""
    if k < 1:
        raise DomainError(f"upscale factor must be >= 1, got {k}")
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise ShapeError(f"image must be 2-D, got shape {arr.shape}")
    return arr.repeat(k, axis=0).repeat(k, axis=1)


def flip(points: np.ndarray, axis: str) -> np.ndarray:
    """Mirror unit-square points: horizontal maps x to 1-x, vertical y to 1-y."""
    pts = _as_points(points)
    if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise DomainError("flip expects coordinates in [0, 1]")
    out = pts.copy()
    if axis == "horizontal":
        out[:, 0] = 1.0 - out[:, 0]
    elif axis == "vertical":
        out[:, 1] = 1.0 - out[:, 1]
    else:
        raise ConfigError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")
    return out


def rotate(points: np.ndarray, angle: float) -> np.ndarray:
    """Rotate about the centroid, then isotropically normalize."""
    pts = _as_points(points)
    centroid = pts.mean(axis=0)
    ca, sa = math.cos(angle), math.sin(angle)
    rel = pts - centroid
    rotated = np.stack(
        [rel[:, 0] * ca - rel[:, 1] * sa, rel[:, 0] * sa + rel[:, 1] * ca], axis=1
    )
    return normalize(rotated + centroid, mode="isotropic")


def augment(
    points: np.ndarray,
    rc: RasterConfig,
    ac: AugmentConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """One randomized raster: optional rotation and flips, then grid + upscale.

    With divisor d > 0 the angle is 2*pi*k/d, k ~ U{1..d}; each flip fires
    independently with probability 0.5.  Draw order is fixed (angle, then
    horizontal, then vertical), so a given generator state yields one image.
    """
    rc.validate()
    ac.validate()
    pts = _as_points(points)
    if ac.d > 0:
        k = int(rng.integers(1, ac.d + 1))
        pts = rotate(pts, 2.0 * math.pi * k / ac.d)
    else:
        pts = normalize(pts, rc.normalize_mode)
    if ac.flip:
        if rng.random() < 0.5:
            pts = flip(pts, "horizontal")
        if rng.random() < 0.5:
            pts = flip(pts, "vertical")
    return upscale(rasterize(pts, rc.c).pixels, rc.upscale)


def to_input(image: np.ndarray) -> np.ndarray:
    """Scale counts into [0, 1] by the image maximum; all-zero stays zero."""
    arr = np.asarray(image, dtype=np.float64)
    peak = arr.max() if arr.size else 0.0
    if peak <= 0.0:
        return np.zeros_like(arr)
    return arr / peak


def export_pgm(image: np.ndarray, path: str | Path, meta: dict | None = None) -> None:
    """Binary PGM (P5) with counts clamped to 255, plus a JSON sidecar.

    Clamping affects the exported bytes only; the in-memory image keeps full
    counts.  The sidecar records id, grid size, upscale factor, point count,
    and pixel sum for downstream bookkeeping.
    """
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ShapeError(f"image must be 2-D, got shape {arr.shape}")
    path = Path(path)
    maxval = int(min(max(int(arr.max()) if arr.size else 0, 1), 255))
    body = np.clip(arr, 0, 255).astype(np.uint8).tobytes()
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode("ascii")
    path.write_bytes(header + body)
    sidecar = dict(meta or {})
    sidecar.setdefault("sum", int(arr.sum()))
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
