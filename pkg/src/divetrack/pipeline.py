"""Stage wiring: frames -> camera path -> panorama -> barycentres -> trajectory."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .errors import DiveTrackError, NoSubject
from .features import Descriptors, Keypoint, describe, detect, keypoint_xy
from .mosaic import Extent, Panorama, RegisteredFrame, composite_background, register_frames
from .raster import to_grayscale
from .registration import (
    AffineTransform2D,
    CameraPath,
    camera_displacement,
    chain_to_reference,
    estimate_affine_ransac,
    match_descriptors,
    resolve_reference,
)
from .segmentation import (
    Component,
    barycenter,
    connected_components,
    hsv_threshold,
    select_subject,
    subtract_background,
)
from .tracking import BarycenterSample, DiveMetrics, Trajectory, assemble, metrics, smooth

log = logging.getLogger(__name__)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # order preserved


def detect_and_describe(frame, detector: str, params: dict) -> tuple[list[Keypoint], Descriptors]:
    gray = to_grayscale(frame)
    kps = detect(gray, detector, **params)
    return kps, describe(gray, kps)


def pair_correspondences(kps_a, desc_a: Descriptors, kps_b, desc_b: Descriptors, ratio: float) -> np.ndarray:
    """``(M, 2, 2)`` array of matched (point in a, point in b)."""
    matches = match_descriptors(desc_a, desc_b, ratio)
    if not matches:
        return np.zeros((0, 2, 2))
    ia = desc_a.keypoint_index[[m.index_a for m in matches]]
    ib = desc_b.keypoint_index[[m.index_b for m in matches]]
    return np.stack([keypoint_xy(kps_a)[ia], keypoint_xy(kps_b)[ib]], axis=1)


@dataclass
class PairStats:
    keypoints: int
    matches: int
    inliers: int


def estimate_pairwise(frames, cfg: PipelineConfig):
    """Affine maps taking frame i+1 into frame i, plus per-pair statistics."""
    feats = _map(lambda f: detect_and_describe(f, cfg.detector, cfg.detector_params), frames, cfg.threads)
    pairwise, stats = [], []
    for i in range(len(frames) - 1):
        (kp_prev, d_prev), (kp_cur, d_cur) = feats[i], feats[i + 1]
        pairs = pair_correspondences(kp_cur, d_cur, kp_prev, d_prev, cfg.ratio)
        try:
            t, inliers = estimate_affine_ransac(pairs, cfg.ransac_iters, cfg.ransac_tol, cfg.seed + i)
        except DiveTrackError as exc:
            raise type(exc)(f"frames {i}->{i + 1}: {exc}") from exc
        pairwise.append(t)
        stats.append(PairStats(len(kp_cur), len(pairs), len(inliers)))
        log.debug("pair %d->%d: %d matches, %d inliers", i, i + 1, len(pairs), len(inliers))
    return pairwise, stats


@dataclass
class MosaicResult:
    path: CameraPath
    extent: Extent
    registered: list[RegisteredFrame]
    panorama: Panorama
    displacement: np.ndarray  # (N, 2)
    pair_stats: list[PairStats]

    @property
    def pairwise_size(self) -> int:
        return len(self.pair_stats)


def run_mosaic(frames, cfg: PipelineConfig) -> MosaicResult:
    frames = list(frames)
    h, w = frames[0].shape[:2]
    pairwise, stats = estimate_pairwise(frames, cfg)
    ref = resolve_reference(cfg.reference, len(frames))
    path = chain_to_reference(pairwise, ref, frame_size=(w, h))
    extent, registered = register_frames(frames, path)
    pano = composite_background(registered)
    return MosaicResult(path, extent, registered, pano, camera_displacement(path, (w, h)), stats)


def background_mask(pano: Panorama, cfg: PipelineConfig) -> np.ndarray:
    """Colour-filtered panorama; never-written pixels count as not passing."""
    return hsv_threshold(pano.image, cfg.hsv_range) & (pano.coverage > 0)


def segment_frame(reg: RegisteredFrame, bg_mask: np.ndarray, cfg: PipelineConfig, previous=None):
    """Subject component of one projected frame, or None when nothing survives."""
    frame_mask = np.zeros(reg.extent.shape, dtype=bool)
    if reg.mask.size:
        frame_mask[reg.window] = hsv_threshold(reg.pixels, cfg.hsv_range) & reg.mask
    fg = subtract_background(frame_mask, bg_mask, cfg.guard_dilate)
    try:
        return select_subject(connected_components(fg), cfg.min_area, previous)
    except NoSubject:
        return None


def segment_sequence(mosaic: MosaicResult, timestamps, cfg: PipelineConfig):
    """Barycentre samples in panorama coordinates, processed in frame order."""
    bg = background_mask(mosaic.panorama, cfg)
    samples: list[BarycenterSample] = []
    subjects: list[Component | None] = []
    previous = None
    for reg, t in zip(mosaic.registered, timestamps):
        comp = segment_frame(reg, bg, cfg, previous)
        subjects.append(comp)
        if comp is None:
            samples.append(BarycenterSample(reg.frame_index, float(t)))
            continue
        x, y = barycenter(comp)
        previous = (x, y)
        samples.append(BarycenterSample(reg.frame_index, float(t), x, y, True, float(comp.area)))
    return samples, subjects


@dataclass
class TrackResult:
    mosaic: MosaicResult
    samples: list[BarycenterSample]
    subjects: list
    trajectory: Trajectory
    metrics: DiveMetrics | None


def run_track(frames, timestamps, cfg: PipelineConfig) -> TrackResult:
    mos = run_mosaic(frames, cfg)
    samples, subjects = segment_sequence(mos, timestamps, cfg)
    traj = smooth(assemble(samples, cfg.max_gap), cfg.window)
    dm = None
    if cfg.water_line_y is not None:
        dm = metrics(traj, cfg.water_line_y, cfg.px_per_meter)
    return TrackResult(mos, samples, subjects, traj, dm)


def compare_detectors(frames, cfg: PipelineConfig, detectors=("fast", "harris", "doh")) -> dict[str, float]:
    """Mean ratio-test match count over consecutive frame pairs, per detector."""
    frames = list(frames)
    out = {}
    for det in detectors:
        feats = _map(lambda f: detect_and_describe(f, det, cfg.detector_params), frames, cfg.threads)
        counts = [len(match_descriptors(feats[i + 1][1], feats[i][1], cfg.ratio)) for i in range(len(frames) - 1)]
        out[det] = float(np.mean(counts)) if counts else 0.0
    return out


def identity_path(n: int, reference_index: int = 0) -> CameraPath:
    return CameraPath(reference_index, [AffineTransform2D.identity() for _ in range(n)])
