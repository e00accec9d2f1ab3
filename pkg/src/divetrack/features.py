"""Interest-point detectors and a binary patch descriptor.

Three detectors are available for the matched-feature comparison: FAST-9,
Harris, and a single-octave determinant-of-Hessian (DoH) blob detector built
on integral-image box filters, which plays the role of SURF's detector.
Descriptors are upright 256-bit BRIEF-style intensity comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmall
from .raster import as_gray, integral

DETECTORS = ("fast", "harris", "doh")

FAST_THRESHOLD = 20 / 255
HARRIS_K = 0.04
HARRIS_REL_THRESHOLD = 0.01
DOH_THRESHOLD = 0.0004
DOH_SIZES = (9, 15, 21, 27)

DESCRIPTOR_BITS = 256
PATCH_SIZE = 31
PATTERN_SEED = 0x5EED

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy)
FAST_CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)
FAST_ARC = 9
HARRIS_BORDER = 3


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    response: float
    scale: float = 1.2
    detector: str = "FAST"


@dataclass
class Descriptors:
    """Packed descriptor bits, one row per surviving keypoint."""

    bits: np.ndarray  # (N, 32) uint8
    keypoint_index: np.ndarray  # (N,) indices into the keypoint list
    dropped: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.keypoint_index)


def keypoint_xy(kps) -> np.ndarray:
    return np.array([(k.x, k.y) for k in kps], dtype=np.float64).reshape(-1, 2)


def _check_size(img: np.ndarray, n: int, name: str) -> None:
    if img.shape[0] < n or img.shape[1] < n:
        raise ImageTooSmall(f"{name} needs at least {n}x{n}, got {img.shape[1]}x{img.shape[0]}")


def _nms_keypoints(resp: np.ndarray, keep: np.ndarray, tag: str, scale: float = 1.2) -> list[Keypoint]:
    peak = resp == ndimage.maximum_filter(resp, size=3, mode="constant", cval=-np.inf)
    ys, xs = np.nonzero(keep & peak)  # row-major order
    return [Keypoint(float(x), float(y), float(resp[y, x]), scale, tag) for y, x in zip(ys, xs)]


# --- FAST --------------------------------------------------------------------

def fast_arc_masks(img: np.ndarray, threshold: float):
    """Per interior pixel: circle-contrast stacks and the 9-arc test.

    Returns ``(diff, bright_arc, dark_arc)`` for the ``(H-6, W-6)`` interior,
    where ``diff`` is ``(16, H-6, W-6)`` ring-minus-centre and the arc masks
    flag, per circle position, membership in a qualifying contiguous arc.
    """
    h, w = img.shape
    centre = img[3:h - 3, 3:w - 3]
    diff = np.stack([img[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx] - centre for dx, dy in FAST_CIRCLE])
    out = []
    for flags in (diff > threshold, diff < -threshold):
        ext = np.concatenate([flags, flags[:FAST_ARC - 1]]).astype(np.int16)
        csum = np.concatenate([np.zeros_like(ext[:1]), np.cumsum(ext, axis=0)])
        starts = (csum[FAST_ARC:FAST_ARC + 16] - csum[:16]) == FAST_ARC  # arc s..s+8 all set
        cover = np.zeros((16 + FAST_ARC - 1,) + flags.shape[1:], dtype=bool)
        for s in range(16):
            cover[s:s + FAST_ARC] |= starts[s]
        member = cover[:16]
        member[:FAST_ARC - 1] |= cover[16:]
        out.append(member)
    return diff, out[0], out[1]


def fast_response(img, threshold: float = FAST_THRESHOLD) -> np.ndarray:
    """Full-size FAST score map; zero where the segment test fails."""
    img = as_gray(img)
    _check_size(img, 7, "FAST")
    diff, bright, dark = fast_arc_masks(img, threshold)
    score = np.where(bright | dark, np.abs(diff), 0.0).sum(axis=0)
    resp = np.zeros_like(img)
    resp[3:-3, 3:-3] = score
    return resp


def detect_fast(img, threshold: float = FAST_THRESHOLD) -> list[Keypoint]:
    """FAST-9 segment test with 3x3 non-maximum suppression on the arc score."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("FAST threshold must lie in (0, 1)")
    resp = fast_response(img, threshold)
    return _nms_keypoints(resp, resp > 0, "FAST")


# --- Harris ------------------------------------------------------------------

def _gaussian_5x5_taps(sigma: float = 1.0) -> np.ndarray:
    x = np.arange(-2, 3, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def central_gradients(img: np.ndarray):
    ix = np.zeros_like(img)
    iy = np.zeros_like(img)
    ix[:, 1:-1] = 0.5 * (img[:, 2:] - img[:, :-2])
    iy[1:-1, :] = 0.5 * (img[2:, :] - img[:-2, :])
    return ix, iy


def harris_response(img, k: float = HARRIS_K) -> np.ndarray:
    img = as_gray(img)
    ix, iy = central_gradients(img)
    g = _gaussian_5x5_taps()

    def smooth(a):
        a = ndimage.correlate1d(a, g, axis=0, mode="constant")
        return ndimage.correlate1d(a, g, axis=1, mode="constant")

    sxx, syy, sxy = smooth(ix * ix), smooth(iy * iy), smooth(ix * iy)
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def detect_harris(img, k: float = HARRIS_K, rel_threshold: float = HARRIS_REL_THRESHOLD) -> list[Keypoint]:
    if not 0.02 <= k <= 0.15:
        raise ValueError("Harris k must lie in [0.02, 0.15]")
    if not 0.0 < rel_threshold < 1.0:
        raise ValueError("Harris rel_threshold must lie in (0, 1)")
    img = as_gray(img)
    _check_size(img, 2 * HARRIS_BORDER + 1, "Harris")
    resp = harris_response(img, k)
    b = HARRIS_BORDER
    inner = np.zeros(resp.shape, dtype=bool)
    inner[b:-b, b:-b] = True
    top = resp[inner].max()
    if top <= 0:
        return []
    keep = inner & (resp > 0) & (resp >= rel_threshold * top)
    return _nms_keypoints(np.where(inner, resp, -np.inf), keep, "HARRIS")


# --- determinant of Hessian ----------------------------------------------------

def doh_responses(img, sizes=DOH_SIZES):
    """Scale-normalised box-filter DoH maps, one per filter size.

    Returns ``(resp, valid)`` with shape ``(len(sizes), H, W)``; ``valid``
    marks pixels whose full filter support lies inside the image.
    """
    img = as_gray(img)
    h, w = img.shape
    s = integral(img).sums
    resp = np.zeros((len(sizes), h, w))
    valid = np.zeros((len(sizes), h, w), dtype=bool)
    for i, size in enumerate(sizes):
        r = (size - 1) // 2
        lobe = size // 3
        hl = (lobe - 1) // 2
        if h <= 2 * r or w <= 2 * r:
            continue
        ny, nx = h - 2 * r, w - 2 * r

        def box(dx0, dy0, dx1, dy1):
            # [x+dx0, x+dx1) x [y+dy0, y+dy1) for every centre (y, x) in the valid window
            ya, yb = r + dy0, r + dy1
            xa, xb = r + dx0, r + dx1
            return (s[yb:yb + ny, xb:xb + nx] - s[ya:ya + ny, xb:xb + nx]
                    - s[yb:yb + ny, xa:xa + nx] + s[ya:ya + ny, xa:xa + nx])

        # +1 / -2 / +1 lobes: whole strip minus three times the middle lobe
        dyy = box(-(lobe - 1), -r, lobe, r + 1) - 3.0 * box(-(lobe - 1), -hl, lobe, hl + 1)
        dxx = box(-r, -(lobe - 1), r + 1, lobe) - 3.0 * box(-hl, -(lobe - 1), hl + 1, lobe)
        dxy = (box(-lobe, -lobe, 0, 0) + box(1, 1, lobe + 1, lobe + 1)
               - box(1, -lobe, lobe + 1, 0) - box(-lobe, 1, 0, lobe + 1))
        area = float(size * size)
        dxx /= area
        dyy /= area
        dxy /= area
        resp[i, r:h - r, r:w - r] = dxx * dyy - (0.9 * dxy) ** 2
        valid[i, r:h - r, r:w - r] = True
    return resp, valid


def detect_doh(img, threshold: float = DOH_THRESHOLD, sizes=DOH_SIZES) -> list[Keypoint]:
    """Blob keypoints: 3x3x3 maxima of the DoH response over space and scale."""
    img = as_gray(img)
    _check_size(img, max(sizes), "DoH")
    resp, valid = doh_responses(img, sizes)
    masked = np.where(valid, resp, -np.inf)
    peak = masked == ndimage.maximum_filter(masked, size=3, mode="constant", cval=-np.inf)
    keep = valid & peak & (resp > threshold) & (resp > 0)
    si, ys, xs = np.nonzero(keep)
    order = np.lexsort((si, xs, ys))
    return [Keypoint(float(xs[j]), float(ys[j]), float(resp[si[j], ys[j], xs[j]]),
                     1.2 * sizes[si[j]] / 9.0, "DOH") for j in order]


def detect(img, detector: str = "doh", **params) -> list[Keypoint]:
    if detector == "fast":
        return detect_fast(img, params.get("fast_threshold", FAST_THRESHOLD))
    if detector == "harris":
        return detect_harris(img, params.get("harris_k", HARRIS_K),
                             params.get("harris_rel_threshold", HARRIS_REL_THRESHOLD))
    if detector == "doh":
        return detect_doh(img, params.get("doh_threshold", DOH_THRESHOLD))
    raise ValueError(f"unknown detector {detector!r}; expected one of {DETECTORS}")


# --- descriptor ----------------------------------------------------------------

def sampling_pattern(seed: int = PATTERN_SEED, n: int = DESCRIPTOR_BITS) -> np.ndarray:
    """``(n, 4)`` int array of ``(dx1, dy1, dx2, dy2)`` comparison offsets.

    Isotropic Gaussian (sigma = patch/5) clipped to the patch; degenerate
    pairs are redrawn. numpy's PCG64 stream is platform independent, so the
    pattern is identical everywhere.
    """
    rng = np.random.default_rng(seed)
    half = PATCH_SIZE // 2
    pts = np.clip(np.rint(rng.normal(0.0, PATCH_SIZE / 5.0, size=(n, 4))), -half, half).astype(np.int64)
    same = (pts[:, 0] == pts[:, 2]) & (pts[:, 1] == pts[:, 3])
    while same.any():
        redraw = np.clip(np.rint(rng.normal(0.0, PATCH_SIZE / 5.0, size=(int(same.sum()), 4))), -half, half)
        pts[same] = redraw.astype(np.int64)
        same = (pts[:, 0] == pts[:, 2]) & (pts[:, 1] == pts[:, 3])
    return pts


_PATTERN = sampling_pattern()


def smooth_for_description(img) -> np.ndarray:
    return ndimage.uniform_filter(as_gray(img), size=5, mode="nearest")


def describe(img, kps, smoothed: np.ndarray | None = None) -> Descriptors:
    """256 pairwise comparisons on the 5x5 box-smoothed patch around each keypoint.

    Keypoints without a full 31x31 patch are dropped; their indices are
    listed in ``Descriptors.dropped``.
    """
    img = as_gray(img)
    sm = smooth_for_description(img) if smoothed is None else smoothed
    h, w = img.shape
    half = PATCH_SIZE // 2
    xy = np.rint(keypoint_xy(kps)).astype(np.int64)
    ok = ((xy[:, 0] >= half) & (xy[:, 0] <= w - 1 - half)
          & (xy[:, 1] >= half) & (xy[:, 1] <= h - 1 - half))
    keep = np.flatnonzero(ok)
    dropped = np.flatnonzero(~ok).tolist()
    if keep.size == 0:
        return Descriptors(np.zeros((0, DESCRIPTOR_BITS // 8), np.uint8), keep, dropped)
    x = xy[keep, 0][:, None]
    y = xy[keep, 1][:, None]
    p = _PATTERN
    a = sm[y + p[:, 1], x + p[:, 0]]
    b = sm[y + p[:, 3], x + p[:, 2]]
    return Descriptors(np.packbits(a < b, axis=1), keep, dropped)


def hamming_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All-pairs Hamming distances between packed bit rows, as int64."""
    # float32 dot products of 0/1 vectors are exact up to 2**24
    ua = np.unpackbits(np.asarray(a, dtype=np.uint8), axis=1).astype(np.float32)
    ub = np.unpackbits(np.asarray(b, dtype=np.uint8), axis=1).astype(np.float32)
    d = ua.sum(1)[:, None] + ub.sum(1)[None, :] - 2.0 * (ua @ ub.T)
    return np.rint(d).astype(np.int64)
