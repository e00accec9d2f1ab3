"""Colour filtering, background-mask subtraction, and subject extraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, NoSubject
from .raster import as_rgb, check_same_geometry, dilate

DEFAULT_GUARD_DILATE = 2
DEFAULT_MIN_AREA = 50
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class HsvRange:
    """Per-channel acceptance intervals; hue wraps through 0 when h_low > h_high.

    Hue is in degrees. ``h_high`` may be 360 to express the full circle.
    """

    h_low: float = 0.0
    h_high: float = 45.0
    s_low: float = 0.15
    s_high: float = 0.9
    v_low: float = 0.25
    v_high: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.h_low < 360.0 and 0.0 <= self.h_high <= 360.0):
            raise ConfigError(f"hue bounds must lie in [0, 360): {self.h_low}, {self.h_high}")
        for lo, hi, name in ((self.s_low, self.s_high, "s"), (self.v_low, self.v_high, "v")):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ConfigError(f"{name} bounds must satisfy 0 <= low <= high <= 1: {lo}, {hi}")

    @classmethod
    def full(cls) -> HsvRange:
        return cls(0.0, 360.0, 0.0, 1.0, 0.0, 1.0)

    def contains_hue(self, h):
        if self.h_low <= self.h_high:
            return (h >= self.h_low) & (h <= self.h_high)
        return (h >= self.h_low) | (h <= self.h_high)


def rgb_to_hsv(r, g, b):
    """Hexcone conversion. Hue in degrees [0, 360), s and v in [0, 1].

    Accepts scalars or arrays of 0-255 channel values; grey pixels get hue 0.
    """
    rgb = np.stack(np.broadcast_arrays(*(np.asarray(c, dtype=np.float64) for c in (r, g, b))))
    mx = rgb.max(axis=0)
    mn = rgb.min(axis=0)
    delta = mx - mn
    v = mx / 255.0
    s = np.divide(delta, mx, out=np.zeros_like(mx), where=mx > 0)
    safe = np.where(delta > 0, delta, 1.0)
    rr, gg, bb = rgb
    h = np.where(mx == rr, ((gg - bb) / safe) % 6.0,
                 np.where(mx == gg, (bb - rr) / safe + 2.0, (rr - gg) / safe + 4.0))
    h = np.where(delta > 0, 60.0 * h, 0.0) % 360.0
    if h.ndim == 0:
        return float(h), float(s), float(v)
    return h, s, v


def image_to_hsv(img) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    img = as_rgb(img)
    return rgb_to_hsv(img[..., 0], img[..., 1], img[..., 2])


def hsv_threshold(img, rng: HsvRange) -> np.ndarray:
    """Double threshold on each HSV channel (closed intervals)."""
    h, s, v = image_to_hsv(img)
    return (rng.contains_hue(h) & (s >= rng.s_low) & (s <= rng.s_high)
            & (v >= rng.v_low) & (v <= rng.v_high))


def subtract_background(frame_mask, bg_mask, guard_dilate: int = DEFAULT_GUARD_DILATE) -> np.ndarray:
    """``frame_mask AND NOT dilate(bg_mask, guard_dilate)``."""
    frame_mask = np.asarray(frame_mask, dtype=bool)
    bg_mask = np.asarray(bg_mask, dtype=bool)
    check_same_geometry(frame_mask, bg_mask)
    return frame_mask & ~dilate(bg_mask, guard_dilate)


@dataclass
class Component:
    pixels: np.ndarray  # (N, 2) integer (x, y), row-major order
    area: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]  # x_min, y_min, x_max, y_max (inclusive)

    @classmethod
    def from_pixels(cls, pixels) -> Component:
        pixels = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
        c = pixels.mean(axis=0)
        lo = pixels.min(axis=0)
        hi = pixels.max(axis=0)
        return cls(pixels, len(pixels), (float(c[0]), float(c[1])),
                   (int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1])))


def connected_components(mask) -> list[Component]:
    """8-connected components ordered by their first pixel in row-major scan."""
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    flat = labels.ravel()
    idx = np.flatnonzero(flat)
    lab = flat[idx]
    order = np.argsort(lab, kind="stable")  # row-major within each label
    idx, lab = idx[order], lab[order]
    bounds = np.flatnonzero(np.diff(lab)) + 1
    groups = np.split(idx, bounds)
    groups.sort(key=lambda g: g[0])
    w = mask.shape[1]
    return [Component.from_pixels(np.column_stack([g % w, g // w])) for g in groups]


def select_subject(components, min_area: int = DEFAULT_MIN_AREA, previous=None) -> Component:
    """Largest component of at least ``min_area`` pixels.

    Ties go to the centroid nearest ``previous`` (when given), then to scan order.
    """
    if min_area < 1:
        raise ValueError("min_area must be >= 1")
    alive = [(i, c) for i, c in enumerate(components) if c.area >= min_area]
    if not alive:
        raise NoSubject(f"no component reaches {min_area} px")

    def key(item):
        i, c = item
        dist = 0.0
        if previous is not None:
            dist = (c.centroid[0] - previous[0]) ** 2 + (c.centroid[1] - previous[1]) ** 2
        return (-c.area, dist, i)

    return min(alive, key=key)[1]


def barycenter(c: Component) -> tuple[float, float]:
    """Unweighted mean of member pixel coordinates."""
    if c.area < 1:
        raise ValueError("empty component")
    m = np.asarray(c.pixels, dtype=np.float64).mean(axis=0)
    return float(m[0]), float(m[1])


def component_mask(c: Component, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=bool)
    out[c.pixels[:, 1], c.pixels[:, 0]] = True
    return out


def annotate(image, subject: Component | None, point=None, marker: int = 3) -> np.ndarray:
    """Copy of ``image`` with the subject contour in white and a red square marker."""
    out = as_rgb(image).copy()
    if subject is not None:
        m = component_mask(subject, out.shape[:2])
        edge = m & ~ndimage.binary_erosion(m, structure=_EIGHT)
        out[edge] = (255, 255, 255)
    if point is not None:
        x, y = int(round(point[0])), int(round(point[1]))
        h, w = out.shape[:2]
        out[max(y - marker, 0):min(y + marker + 1, h), max(x - marker, 0):min(x + marker + 1, w)] = (255, 0, 0)
    return out
