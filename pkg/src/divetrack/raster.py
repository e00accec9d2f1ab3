"""Image containers and pixel-level primitives.

Conventions used throughout the package:

* an RGB image ("ImageBuffer") is an ``(H, W, 3)`` uint8 array,
* a gray image is an ``(H, W)`` float64 array with values in [0, 1],
* a binary mask is an ``(H, W)`` bool array.

Pixel ``(x, y)`` is ``img[y, x]``; x grows right, y grows down.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import GeometryMismatch, OutOfBounds, UnreadableFrame

# Rec.601 luma
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def as_rgb(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected (H, W, 3) image, got shape {img.shape}")
    if img.dtype != np.uint8:
        if np.any(img < 0) or np.any(img > 255):
            raise ValueError("RGB channels must lie in [0, 255]")
        img = img.astype(np.uint8)
    return img


def as_gray(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"expected (H, W) gray image, got shape {img.shape}")
    return img


def to_grayscale(img) -> np.ndarray:
    """Rec.601 luminance scaled to [0, 1]."""
    img = as_rgb(img)
    gray = img.astype(np.float64) @ LUMA_WEIGHTS / 255.0
    return np.clip(gray, 0.0, 1.0)


@dataclass(frozen=True)
class IntegralImage:
    """Summed-area table with a zero first row and column.

    ``sums[y, x]`` is the sum of ``img[:y, :x]``.
    """

    sums: np.ndarray

    @property
    def width(self) -> int:
        return self.sums.shape[1] - 1

    @property
    def height(self) -> int:
        return self.sums.shape[0] - 1

    def rect_sum(self, x0: int, y0: int, x1: int, y1: int) -> float:
        """Sum over the half-open rectangle [x0, x1) x [y0, y1)."""
        if x1 <= x0 or y1 <= y0:
            return 0.0
        s = self.sums
        return float(s[y1, x1] - s[y0, x1] - s[y1, x0] + s[y0, x0])

    def box_sums(self, x0, y0, x1, y1) -> np.ndarray:
        """Vectorised rect_sum; arguments broadcast against each other."""
        s = self.sums
        return s[y1, x1] - s[y0, x1] - s[y1, x0] + s[y0, x0]


def integral(img) -> IntegralImage:
    img = as_gray(img)
    sums = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=sums[1:, 1:])
    return IntegralImage(sums)


def sample_bilinear(img, x: float, y: float):
    """Bilinear sample of a gray or RGB image at real coordinates.

    Raises OutOfBounds outside ``[0, W-1] x [0, H-1]``; callers treat such
    points as unwritten rather than clamping them.
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
        raise OutOfBounds(f"({x}, {y}) outside {w}x{h} image")
    values, _ = sample_bilinear_many(img, np.array([x]), np.array([y]))
    return values[0] if img.ndim == 2 else values[0].copy()


def sample_bilinear_many(img, xs: np.ndarray, ys: np.ndarray):
    """Vectorised bilinear sampling.

    Returns ``(values, valid)``. Values at invalid (out-of-domain) points are 0.
    Output is float64 with shape ``xs.shape`` (+ channel axis for RGB).
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    eps = 1e-9  # absorbs round-off from composed transforms at the domain edge
    valid = (xs >= -eps) & (xs <= w - 1 + eps) & (ys >= -eps) & (ys <= h - 1 + eps)
    xv = np.clip(np.where(valid, xs, 0.0), 0.0, w - 1)
    yv = np.clip(np.where(valid, ys, 0.0), 0.0, h - 1)
    x0 = np.minimum(np.floor(xv).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(yv).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xv - x0
    fy = yv - y0
    src = img.astype(np.float64, copy=False)
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    if img.ndim == 3:
        out[~valid] = 0.0
    else:
        out = np.where(valid, out, 0.0)
    return out, valid


_SQUARE = np.ones((3, 3), dtype=bool)


def dilate(mask, iterations: int = 1) -> np.ndarray:
    """Binary dilation with a 3x3 square element, repeated ``iterations`` times."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    mask = np.asarray(mask, dtype=bool)
    if iterations == 0 or not mask.any():
        return mask.copy()
    # scipy treats iterations=0 as "until stable", hence the guard above
    return ndimage.binary_dilation(mask, structure=_SQUARE, iterations=iterations)


def check_same_geometry(a: np.ndarray, b: np.ndarray, what: str = "masks") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise GeometryMismatch(f"{what} differ in geometry: {a.shape[:2]} vs {b.shape[:2]}")


# --- file I/O ----------------------------------------------------------------

def read_image(path) -> np.ndarray:
    """Read an 8-bit RGB PNG or binary PPM as an (H, W, 3) uint8 array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("RGB", "RGBA", "L", "P"):
                raise UnreadableFrame(path, f"unsupported mode {im.mode}")
            return np.array(im.convert("RGB"), dtype=np.uint8)
    except UnreadableFrame:
        raise
    except Exception as exc:  # PIL raises a zoo of exception types
        raise UnreadableFrame(path, str(exc)) from exc


def write_image(path, img) -> None:
    """Write RGB image; format chosen by suffix (``.png`` or ``.ppm``)."""
    path = Path(path)
    img = as_rgb(img)
    if path.suffix.lower() == ".ppm":
        h, w = img.shape[:2]
        with open(path, "wb") as fh:
            fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
            fh.write(np.ascontiguousarray(img).tobytes())
    else:
        Image.fromarray(img, "RGB").save(path, format="PNG")


def write_mask(path, mask) -> None:
    mask = np.asarray(mask, dtype=bool)
    Image.fromarray(mask.astype(np.uint8) * 255, "L").save(path, format="PNG")


def read_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("L")) > 127


def write_gray16(path, values) -> None:
    """16-bit gray PNG (used for coverage maps)."""
    values = np.clip(np.asarray(values), 0, 65535).astype(np.uint16)
    Image.fromarray(values).save(path, format="PNG")


def read_gray16(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im).astype(np.int64)
