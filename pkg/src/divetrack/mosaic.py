"""Panorama sizing, inverse-mapped frame warping, and median compositing."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, GeometryMismatch
from .raster import as_rgb, sample_bilinear_many
from .registration import AffineTransform2D, CameraPath, invert

UNWRITTEN = 256  # sentinel above any 8-bit value; sorts last
_ROUND_EPS = 1e-6


@dataclass(frozen=True)
class Extent:
    """Panorama geometry; panorama px = reference-frame px + origin_offset."""

    width: int
    height: int
    origin_offset: tuple[int, int]

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width


@dataclass
class RegisteredFrame:
    """A frame resampled into panorama coordinates.

    Only the bounding window ``[x0, x0+w) x [y0, y0+h)`` is stored; ``mask``
    is true exactly where ``pixels`` were written.
    """

    frame_index: int
    x0: int
    y0: int
    pixels: np.ndarray  # (h, w, 3) uint8
    mask: np.ndarray  # (h, w) bool
    extent: Extent

    @property
    def window(self) -> tuple[slice, slice]:
        h, w = self.mask.shape
        return slice(self.y0, self.y0 + h), slice(self.x0, self.x0 + w)

    def full_mask(self) -> np.ndarray:
        out = np.zeros(self.extent.shape, dtype=bool)
        out[self.window] = self.mask
        return out

    def full_pixels(self) -> np.ndarray:
        out = np.zeros(self.extent.shape + (3,), dtype=np.uint8)
        out[self.window] = np.where(self.mask[..., None], self.pixels, 0)
        return out


@dataclass
class Panorama:
    image: np.ndarray  # (H, W, 3) uint8, black where never written
    origin_offset: tuple[int, int]
    coverage: np.ndarray  # (H, W) contributing-frame counts

    @property
    def never_written(self) -> np.ndarray:
        return self.coverage == 0

    def unwritten_fraction(self) -> float:
        return float(self.never_written.mean())


def _frame_corners(w: int, h: int) -> np.ndarray:
    return np.array([(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)], dtype=np.float64)


def panorama_extent(path: CameraPath, frame_w: int, frame_h: int) -> Extent:
    """Union bounding box of every frame's corners in reference coordinates."""
    pts = np.vstack([t.apply_many(_frame_corners(frame_w, frame_h)) for t in path.to_global])
    x_lo = math.floor(pts[:, 0].min() + _ROUND_EPS)
    y_lo = math.floor(pts[:, 1].min() + _ROUND_EPS)
    x_hi = math.ceil(pts[:, 0].max() - _ROUND_EPS)
    y_hi = math.ceil(pts[:, 1].max() - _ROUND_EPS)
    return Extent(x_hi - x_lo, y_hi - y_lo, (-x_lo, -y_lo))


def warp_frame(frame, t: AffineTransform2D, extent: Extent, frame_index: int = 0) -> RegisteredFrame:
    """Inverse-map ``frame`` into the panorama through ``t`` (frame -> reference).

    Each panorama pixel whose preimage lies in the source frame is sampled
    bilinearly; all others stay unwritten.
    """
    frame = as_rgb(frame)
    h, w = frame.shape[:2]
    back = invert(t)
    ox, oy = extent.origin_offset
    # pixel-centre domain of the source, mapped forward, bounds the window
    dom = np.array([(0.0, 0.0), (w - 1, 0.0), (0.0, h - 1), (w - 1, h - 1)])
    pts = t.apply_many(dom) + (ox, oy)
    x0 = max(math.floor(pts[:, 0].min()), 0)
    y0 = max(math.floor(pts[:, 1].min()), 0)
    x1 = min(math.ceil(pts[:, 0].max()) + 1, extent.width)
    y1 = min(math.ceil(pts[:, 1].max()) + 1, extent.height)
    if x1 <= x0 or y1 <= y0:
        return RegisteredFrame(frame_index, 0, 0, np.zeros((0, 0, 3), np.uint8),
                               np.zeros((0, 0), bool), extent)
    us, vs = np.meshgrid(np.arange(x0, x1, dtype=np.float64) - ox,
                         np.arange(y0, y1, dtype=np.float64) - oy)
    sx = back.a11 * us + back.a12 * vs + back.tx
    sy = back.a21 * us + back.a22 * vs + back.ty
    values, valid = sample_bilinear_many(frame, sx, sy)
    pixels = np.clip(np.rint(values), 0, 255).astype(np.uint8)
    pixels[~valid] = 0
    return RegisteredFrame(frame_index, x0, y0, pixels, valid, extent)


def project_frame(frame_index: int, path: CameraPath, extent: Extent, frame) -> RegisteredFrame:
    """Place frame ``frame_index`` onto the panorama grid."""
    return warp_frame(frame, path.to_global[frame_index], extent, frame_index)


def composite_background(frames: list[RegisteredFrame], rows_per_chunk: int = 64) -> Panorama:
    """Per-pixel, per-channel lower median over the frames that wrote each pixel."""
    if not frames:
        raise EmptyInput("no registered frames to composite")
    extent = frames[0].extent
    if any(f.extent != extent for f in frames):
        raise GeometryMismatch("registered frames do not share one extent")
    H, W = extent.shape
    image = np.zeros((H, W, 3), dtype=np.uint8)
    coverage = np.zeros((H, W), dtype=np.int64)
    for r0 in range(0, H, rows_per_chunk):
        r1 = min(r0 + rows_per_chunk, H)
        hits = [f for f in frames if f.mask.size and f.y0 < r1 and f.y0 + f.mask.shape[0] > r0]
        if not hits:
            continue
        stack = np.full((r1 - r0, W, 3, len(hits)), UNWRITTEN, dtype=np.uint16)
        for j, f in enumerate(hits):
            a = max(r0, f.y0)
            b = min(r1, f.y0 + f.mask.shape[0])
            m = f.mask[a - f.y0:b - f.y0]
            px = f.pixels[a - f.y0:b - f.y0]
            dst = stack[a - r0:b - r0, f.x0:f.x0 + m.shape[1], :, j]
            dst[m] = px[m]
        cov = (stack[:, :, 0, :] != UNWRITTEN).sum(axis=-1)
        stack.sort(axis=-1)
        k = np.maximum((cov - 1) // 2, 0)
        med = np.take_along_axis(stack, np.broadcast_to(k[:, :, None, None], (r1 - r0, W, 3, 1)), axis=-1)[..., 0]
        med[cov == 0] = 0
        image[r0:r1] = med.astype(np.uint8)
        coverage[r0:r1] = cov
    return Panorama(image, extent.origin_offset, coverage)


def register_frames(frames, path: CameraPath, extent: Extent | None = None):
    """Warp every frame; returns ``(extent, [RegisteredFrame])``."""
    h, w = frames[0].shape[:2]
    if extent is None:
        extent = panorama_extent(path, w, h)
    return extent, [project_frame(i, path, extent, f) for i, f in enumerate(frames)]


def build_panorama(frames, path: CameraPath):
    extent, registered = register_frames(frames, path)
    return composite_background(registered), registered
