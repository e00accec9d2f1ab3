"""Deterministic synthetic dive scenes with ground truth.

A procedural background is cropped along a known camera path, and an
ellipse "diver" follows closed-form ballistics. Truth values are in
background coordinates.
"""
from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import LengthMismatch, SpecOutOfBounds
from .ingest import FrameSequence

# texture hues stay on one side of the colour circle, so blurred mixtures
# never wander toward the subject's hue
TEXTURE_HUE_RANGE = (100.0, 260.0)
MIN_HUE_SEPARATION = 60.0


@dataclass(frozen=True)
class Ballistics:
    x0: float
    y0: float
    vx: float = 0.0
    vy: float = 0.0
    g: float = 0.0  # px/s^2, positive pulls toward larger y (down)

    def position(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.x0 + self.vx * t, self.y0 + self.vy * t + 0.5 * self.g * t * t

    @property
    def apex_time(self) -> float:
        return -self.vy / self.g if self.g else 0.0

    @property
    def apex_y(self) -> float:
        return float(self.position(self.apex_time)[1])

    def crossing_time(self, y_line: float) -> float:
        """Time after the apex at which y reaches ``y_line`` going down."""
        a, b, c = 0.5 * self.g, self.vy, self.y0 - y_line
        if a == 0:
            return -c / b
        return (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)


@dataclass
class SceneSpec:
    background_size: tuple[int, int]  # (W, H)
    camera_path: list[tuple[int, int]]  # top-left of each frame window in background px
    frame_size: tuple[int, int] = (640, 480)
    fps: float = 20.0
    texture_seed: int = 0
    subject_radii: tuple[float, float] = (12.0, 20.0)
    subject_hsv: tuple[float, float, float] = (20.0, 0.5, 0.8)
    ballistics: Ballistics | None = None
    water_line_y: float | None = None  # background px, truth only
    blob_density: float = 1.0 / 700.0
    blur_sigma: float = 1.0

    @property
    def frame_count(self) -> int:
        return len(self.camera_path)


@dataclass
class SyntheticScene:
    spec: SceneSpec
    sequence: FrameSequence
    background: np.ndarray
    truth_path: np.ndarray  # (N, 2) camera offsets
    truth_trajectory: np.ndarray  # (N, 2) subject centre, NaN when no subject
    subject_masks: list[np.ndarray] = field(default_factory=list)  # per frame, frame coords


def _hue_distance_to_arc(h: float, lo: float, hi: float) -> float:
    h %= 360.0
    if lo <= h <= hi:
        return 0.0
    return min(min(abs(h - b), 360.0 - abs(h - b)) for b in (lo, hi))


def hsv_to_rgb8(h: float, s: float, v: float) -> tuple[int, int, int]:
    r, g, b = colorsys.hsv_to_rgb((h % 360.0) / 360.0, s, v)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def validate(spec: SceneSpec) -> None:
    bw, bh = spec.background_size
    fw, fh = spec.frame_size
    if not spec.camera_path:
        raise SpecOutOfBounds("camera path is empty")
    for k, (tx, ty) in enumerate(spec.camera_path):
        if tx != int(tx) or ty != int(ty):
            raise SpecOutOfBounds(f"frame {k}: camera offsets must be whole pixels")
        if tx < 0 or ty < 0 or tx + fw > bw or ty + fh > bh:
            raise SpecOutOfBounds(f"frame {k}: window ({tx}, {ty}, {fw}x{fh}) leaves the {bw}x{bh} background")
    if spec.ballistics is not None:
        d = _hue_distance_to_arc(spec.subject_hsv[0], *TEXTURE_HUE_RANGE)
        if d < MIN_HUE_SEPARATION:
            raise SpecOutOfBounds(f"subject hue is only {d:.0f} deg from the texture palette")
    if not spec.fps > 0:
        raise SpecOutOfBounds("fps must be positive")


def make_background(width: int, height: int, seed: int, blob_density: float = 1.0 / 700.0,
                    blur_sigma: float = 1.0) -> np.ndarray:
    """Seeded high-contrast texture: grey checkerboard under coloured and grey discs."""
    rng = np.random.default_rng(seed)
    cell = 24
    yy, xx = np.mgrid[0:height, 0:width]
    checker = ((xx // cell + yy // cell) % 2).astype(bool)
    img = np.where(checker[..., None], 150.0, 95.0) * np.ones(3)
    n_blobs = int(width * height * blob_density)
    for _ in range(n_blobs):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        r = rng.uniform(3.0, 12.0)
        if rng.random() < 0.25:
            col = np.full(3, rng.uniform(10, 245))
        else:
            col = np.array(hsv_to_rgb8(rng.uniform(*TEXTURE_HUE_RANGE), rng.uniform(0.35, 1.0),
                                       rng.uniform(0.3, 1.0)), dtype=np.float64)
        x0, x1 = max(int(cx - r) - 1, 0), min(int(cx + r) + 2, width)
        y0, y1 = max(int(cy - r) - 1, 0), min(int(cy + r) + 2, height)
        if x1 <= x0 or y1 <= y0:
            continue
        inside = (xx[y0:y1, x0:x1] - cx) ** 2 + (yy[y0:y1, x0:x1] - cy) ** 2 <= r * r
        img[y0:y1, x0:x1][inside] = col
    if blur_sigma > 0:
        img = ndimage.gaussian_filter(img, sigma=(blur_sigma, blur_sigma, 0), mode="reflect")
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def ellipse_mask(shape, cx: float, cy: float, rx: float, ry: float) -> np.ndarray:
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


def generate(spec: SceneSpec) -> SyntheticScene:
    validate(spec)
    bw, bh = spec.background_size
    fw, fh = spec.frame_size
    bg = make_background(bw, bh, spec.texture_seed, spec.blob_density, spec.blur_sigma)
    n = spec.frame_count
    t = np.arange(n) / spec.fps
    path = np.array(spec.camera_path, dtype=np.float64).reshape(n, 2)
    if spec.ballistics is not None:
        xs, ys = spec.ballistics.position(t)
        traj = np.column_stack([xs, ys])
    else:
        traj = np.full((n, 2), np.nan)
    colour = np.array(hsv_to_rgb8(*spec.subject_hsv), dtype=np.uint8)
    frames, masks = [], []
    for k in range(n):
        tx, ty = int(path[k, 0]), int(path[k, 1])
        frame = bg[ty:ty + fh, tx:tx + fw].copy()
        m = np.zeros((fh, fw), dtype=bool)
        if spec.ballistics is not None:
            m = ellipse_mask((fh, fw), traj[k, 0] - tx, traj[k, 1] - ty, *spec.subject_radii)
            frame[m] = colour
        frames.append(frame)
        masks.append(m)
    seq = FrameSequence(frames, spec.fps, spec.fps, t)
    return SyntheticScene(spec, seq, bg, path, traj, masks)


# --- canned scenes -----------------------------------------------------------

DIVE_BALLISTICS = Ballistics(x0=380.0, y0=130.0, vx=40.0, vy=-128.0, g=160.0)
DIVE_WATER_LINE = 400.0


def camera_path(frame_count: int, pan: float, jitter: int, seed: int, margin: int = 4):
    """Horizontal pan of ``pan`` px in total with integer jitter in [-jitter, jitter]."""
    rng = np.random.default_rng(seed)
    base = np.rint(np.linspace(0.0, pan, frame_count)).astype(int) if frame_count > 1 else np.zeros(1, int)
    jx = rng.integers(-jitter, jitter + 1, size=frame_count)
    jy = rng.integers(-jitter, jitter + 1, size=frame_count)
    return [(int(margin + jitter + b + dx), int(margin + jitter + dy)) for b, dx, dy in zip(base, jx, jy)]


def dive_scene(frame_count: int = 60, pan: float = 300.0, jitter: int = 2, seed: int = 7,
               fps: float = 20.0, subject: bool = True, frame_size=(640, 480)) -> SceneSpec:
    margin = 4
    fw, fh = frame_size
    path = camera_path(frame_count, pan, jitter, seed + 1, margin)
    size = (int(fw + pan + 2 * (jitter + margin)), int(fh + 2 * (jitter + margin)))
    return SceneSpec(size, path, frame_size, fps, texture_seed=seed,
                     ballistics=DIVE_BALLISTICS if subject else None,
                     water_line_y=DIVE_WATER_LINE if subject else None)


def jitter_scene(frame_count: int = 60, jitter: int = 3, seed: int = 11, subject: bool = True) -> SceneSpec:
    return dive_scene(frame_count, pan=0.0, jitter=jitter, seed=seed, subject=subject)


# --- scoring -----------------------------------------------------------------

def _aligned(est, truth, reference_index: int):
    est = np.asarray(est, dtype=np.float64).reshape(-1, 2)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1, 2)
    if len(est) != len(truth):
        raise LengthMismatch(f"{len(est)} estimates vs {len(truth)} truth values")
    return est - est[reference_index], truth - truth[reference_index]


def score(est_path, truth_path, reference_index: int = 0) -> float:
    """RMSE (px) between two position series after aligning both at the reference index."""
    e, t = _aligned(est_path, truth_path, reference_index)
    return float(np.sqrt(np.mean(np.sum((e - t) ** 2, axis=1))))


def score_traj(est, truth, reference_index: int = 0) -> float:
    """As :func:`score`, ignoring rows where either series is NaN."""
    e, t = _aligned(est, truth, reference_index)
    ok = np.isfinite(e).all(axis=1) & np.isfinite(t).all(axis=1)
    if not ok.any():
        return math.nan
    return float(np.sqrt(np.mean(np.sum((e[ok] - t[ok]) ** 2, axis=1))))
