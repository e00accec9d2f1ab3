"""Descriptor matching, robust affine estimation, and camera-path chaining."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import Degenerate, NoConsensus, Singular
from .features import hamming_matrix

log = logging.getLogger(__name__)

DEFAULT_RATIO = 0.8
SINGLETON_MAX_DISTANCE = 64
RANSAC_ITERS = 500
RANSAC_TOL = 2.0
MIN_INLIERS = 6
MIN_DET = 1e-6


class ConditioningWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Match:
    index_a: int
    index_b: int
    distance: int


@dataclass(frozen=True)
class AffineTransform2D:
    """(x, y) -> (a11 x + a12 y + tx, a21 x + a22 y + ty)."""

    a11: float = 1.0
    a12: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    @classmethod
    def identity(cls) -> AffineTransform2D:
        return cls()

    @classmethod
    def translation(cls, tx: float, ty: float) -> AffineTransform2D:
        return cls(tx=float(tx), ty=float(ty))

    @classmethod
    def from_matrix(cls, m) -> AffineTransform2D:
        m = np.asarray(m, dtype=np.float64)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1], m[0, 2], m[1, 2])

    @property
    def matrix(self) -> np.ndarray:
        """3x3 homogeneous matrix."""
        return np.array([[self.a11, self.a12, self.tx],
                         [self.a21, self.a22, self.ty],
                         [0.0, 0.0, 1.0]])

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def coefficients(self) -> tuple[float, ...]:
        return (self.a11, self.a12, self.a21, self.a22, self.tx, self.ty)

    def apply_many(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([self.a11 * x + self.a12 * y + self.tx,
                                self.a21 * x + self.a22 * y + self.ty])


def apply(t: AffineTransform2D, p) -> tuple[float, float]:
    x, y = p
    return (t.a11 * x + t.a12 * y + t.tx, t.a21 * x + t.a22 * y + t.ty)


def compose(t1: AffineTransform2D, t2: AffineTransform2D) -> AffineTransform2D:
    """Map that applies ``t2`` first, then ``t1``."""
    return AffineTransform2D(
        t1.a11 * t2.a11 + t1.a12 * t2.a21,
        t1.a11 * t2.a12 + t1.a12 * t2.a22,
        t1.a21 * t2.a11 + t1.a22 * t2.a21,
        t1.a21 * t2.a12 + t1.a22 * t2.a22,
        t1.a11 * t2.tx + t1.a12 * t2.ty + t1.tx,
        t1.a21 * t2.tx + t1.a22 * t2.ty + t1.ty,
    )


def invert(t: AffineTransform2D) -> AffineTransform2D:
    d = t.det
    if abs(d) <= MIN_DET:
        raise Singular(f"affine map with |det| = {abs(d):.3g} is not invertible")
    b11, b12, b21, b22 = t.a22 / d, -t.a12 / d, -t.a21 / d, t.a11 / d
    return AffineTransform2D(b11, b12, b21, b22,
                             -(b11 * t.tx + b12 * t.ty), -(b21 * t.tx + b22 * t.ty))


# --- matching ------------------------------------------------------------------

def match_descriptors(a, b, ratio: float = DEFAULT_RATIO) -> list[Match]:
    """Ratio-test nearest-neighbour matching in Hamming space, made one-to-one.

    ``a`` and ``b`` are packed ``(N, 32)`` bit arrays (or Descriptors). When
    ``b`` holds a single descriptor the ratio test is undefined and a match
    is kept iff its distance is at most 64 bits.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must lie in (0, 1]")
    a = getattr(a, "bits", a)
    b = getattr(b, "bits", b)
    if len(a) == 0 or len(b) == 0:
        return []
    d = hamming_matrix(a, b)
    nearest = np.argmin(d, axis=1)  # first index on ties
    d1 = d[np.arange(len(a)), nearest]
    if d.shape[1] == 1:
        ok = d1 <= SINGLETON_MAX_DISTANCE
    else:
        d2 = np.partition(d, 1, axis=1)[:, 1]
        ok = d1 < ratio * d2
    best: dict[int, Match] = {}
    for ia in np.flatnonzero(ok):  # ascending a-index, so ties keep the smaller one
        m = Match(int(ia), int(nearest[ia]), int(d1[ia]))
        cur = best.get(m.index_b)
        if cur is None or m.distance < cur.distance:
            best[m.index_b] = m
    return sorted(best.values(), key=lambda m: m.index_a)


# --- estimation ----------------------------------------------------------------

def _split_pairs(pairs) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.size == 0:
        return np.zeros((0, 2)), np.zeros((0, 2))
    arr = arr.reshape(-1, 2, 2)
    return arr[:, 0, :], arr[:, 1, :]


def _normalizer(pts: np.ndarray) -> np.ndarray:
    """Similarity sending the centroid to 0 and the mean radius to sqrt(2)."""
    c = pts.mean(axis=0)
    r = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = math.sqrt(2.0) / r if r > 0 else 1.0
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _is_collinear(src: np.ndarray) -> bool:
    centred = src - src.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    return sv[0] == 0 or sv[-1] <= 1e-9 * max(sv[0], 1.0)


def estimate_affine_lsq(pairs) -> AffineTransform2D:
    """Least-squares affine fit from ``(source, target)`` point pairs.

    Both point sets are Hartley-normalised before solving; target-side
    squared residuals are minimised.
    """
    src, dst = _split_pairs(pairs)
    if len(src) < 3:
        raise Degenerate(f"need at least 3 pairs, got {len(src)}")
    if _is_collinear(src):
        raise Degenerate("source points are collinear")
    ts, td = _normalizer(src), _normalizer(dst)
    ns = src @ ts[:2, :2].T + ts[:2, 2]
    nd = dst @ td[:2, :2].T + td[:2, 2]
    design = np.column_stack([ns, np.ones(len(ns))])
    sol, *_ = np.linalg.lstsq(design, nd, rcond=None)  # (3, 2)
    a_n = np.eye(3)
    a_n[:2, :] = sol.T
    m = np.linalg.solve(td, a_n @ ts)
    t = AffineTransform2D.from_matrix(m)
    if abs(t.det) <= MIN_DET:
        raise Degenerate("fitted affine map is singular")
    return t


def reprojection_errors(t: AffineTransform2D, pairs) -> np.ndarray:
    src, dst = _split_pairs(pairs)
    return np.sqrt(((t.apply_many(src) - dst) ** 2).sum(axis=1))


def _solve_minimal(src: np.ndarray, dst: np.ndarray):
    """Exact affine maps through batches of 3 correspondences.

    ``src``, ``dst`` are ``(K, 3, 2)``. Returns ``(K, 2, 3)`` matrices and a
    mask of non-degenerate samples.
    """
    design = np.concatenate([src, np.ones(src.shape[:2] + (1,))], axis=2)  # (K, 3, 3)
    det = np.linalg.det(design)
    ok = np.abs(det) > 1e-9
    safe = np.where(ok[:, None, None], design, np.eye(3))
    sol = np.linalg.solve(safe, dst)  # (K, 3, 2)
    return np.transpose(sol, (0, 2, 1)), ok


def estimate_affine_ransac(pairs, iters: int = RANSAC_ITERS, tol: float = RANSAC_TOL,
                           seed: int = 0) -> tuple[AffineTransform2D, np.ndarray]:
    """Seeded RANSAC over minimal 3-point samples, refined by least squares.

    Returns the refined map and the indices of pairs within ``tol`` pixels
    of it. Raises NoConsensus when fewer than 6 inliers support any model.
    """
    src, dst = _split_pairs(pairs)
    n = len(src)
    if n < 3:
        raise Degenerate(f"need at least 3 pairs, got {n}")
    if n < MIN_INLIERS:
        raise NoConsensus(f"{n} pairs cannot reach {MIN_INLIERS} inliers")
    rng = np.random.default_rng(seed)
    samples = np.array([rng.choice(n, size=3, replace=False) for _ in range(iters)])
    models, ok = _solve_minimal(src[samples], dst[samples])
    x, y = src[:, 0], src[:, 1]
    m = models[:, :, :, None]  # (K, 2, 3, 1) broadcasts against the N points
    ex = m[:, 0, 0] * x + m[:, 0, 1] * y + m[:, 0, 2] - dst[:, 0]
    ey = m[:, 1, 0] * x + m[:, 1, 1] * y + m[:, 1, 2] - dst[:, 1]
    err2 = ex * ex + ey * ey
    counts = np.where(ok, (err2 <= tol * tol).sum(axis=1), -1)
    best = int(np.argmax(counts))  # first best on ties
    if counts[best] < MIN_INLIERS:
        raise NoConsensus(f"best consensus has {max(int(counts[best]), 0)} inliers, need {MIN_INLIERS}")
    consensus = np.flatnonzero(err2[best] <= tol * tol)
    pairs_arr = np.stack([src, dst], axis=1)
    refined = estimate_affine_lsq(pairs_arr[consensus])
    inliers = np.flatnonzero(reprojection_errors(refined, pairs_arr) <= tol)
    if len(inliers) < MIN_INLIERS:
        raise NoConsensus(f"refined model keeps only {len(inliers)} inliers")
    return refined, inliers


# --- camera path ---------------------------------------------------------------

@dataclass
class CameraPath:
    """Per-frame maps from frame coordinates into reference-frame coordinates."""

    reference_index: int
    to_global: list[AffineTransform2D]

    def __len__(self) -> int:
        return len(self.to_global)


def _check_conditioning(t: AffineTransform2D, k: int, frame_size) -> None:
    d = abs(t.det)
    reasons = []
    if not 0.5 <= d <= 2.0:
        reasons.append(f"|det|={d:.3f} outside [0.5, 2]")
    if frame_size is not None:
        diag = math.hypot(*frame_size)
        if max(abs(t.tx), abs(t.ty)) > 10.0 * diag:
            reasons.append(f"translation ({t.tx:.1f}, {t.ty:.1f}) exceeds 10x the frame diagonal")
    if reasons:
        msg = f"frame {k}: transform is poorly conditioned: " + "; ".join(reasons)
        log.warning(msg)
        warnings.warn(msg, ConditioningWarning, stacklevel=3)


def chain_to_reference(pairwise, reference_index: int, frame_size=None) -> CameraPath:
    """Compose consecutive-frame maps into maps toward ``reference_index``.

    ``pairwise[i]`` maps frame ``i+1`` coordinates into frame ``i`` coordinates.
    """
    n = len(pairwise) + 1
    if not 0 <= reference_index < n:
        raise IndexError(f"reference index {reference_index} outside 0..{n - 1}")
    out: list[AffineTransform2D | None] = [None] * n
    out[reference_index] = AffineTransform2D.identity()
    for k in range(reference_index + 1, n):
        out[k] = compose(out[k - 1], pairwise[k - 1])
    for k in range(reference_index - 1, -1, -1):
        out[k] = compose(out[k + 1], invert(pairwise[k]))
    for k, t in enumerate(out):
        if abs(t.det) <= MIN_DET:
            raise Singular(f"frame {k}: composed transform is singular")
        _check_conditioning(t, k, frame_size)
    return CameraPath(reference_index, out)


def resolve_reference(policy, n_frames: int) -> int:
    """``middle`` | ``first`` | integer index."""
    if policy in (None, "middle"):
        return (n_frames - 1) // 2
    if policy == "first":
        return 0
    idx = int(policy)
    if not 0 <= idx < n_frames:
        raise ValueError(f"reference {idx} outside 0..{n_frames - 1}")
    return idx


def camera_displacement(path: CameraPath, frame_size) -> np.ndarray:
    """Frame-centre positions relative to the reference-frame centre, ``(N, 2)``."""
    w, h = frame_size
    c = ((w - 1) / 2.0, (h - 1) / 2.0)
    pts = np.array([apply(t, c) for t in path.to_global])
    return pts - np.array(c)
