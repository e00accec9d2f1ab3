"""Frame-sequence loading and temporal decimation."""
from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadRate, MixedGeometry, NoFrames
from .raster import read_image, write_image

log = logging.getLogger(__name__)

# below this the up-to-6 figures of a dive are undersampled
ALIASING_FLOOR_HZ = 6.0
DEFAULT_SAMPLE_FPS = 20.0

_FRAME_RE = re.compile(r"(\d+)\.(png|ppm)$", re.IGNORECASE)


class AliasingWarning(UserWarning):
    pass


@dataclass
class FrameSequence:
    frames: list[np.ndarray]
    source_fps: float
    sample_fps: float
    timestamps: np.ndarray = field(default=None)
    source_indices: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.timestamps is None:
            self.timestamps = np.arange(len(self.frames)) / self.sample_fps
        if not self.source_indices:
            self.source_indices = list(range(len(self.frames)))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_size(self) -> tuple[int, int]:
        h, w = self.frames[0].shape[:2]
        return w, h


def decimation_step(source_fps: float, sample_fps: float) -> int:
    if not sample_fps > 0 or not source_fps > 0 or sample_fps > source_fps:
        raise BadRate(f"sample_fps={sample_fps} must be in (0, source_fps={source_fps}]")
    return max(1, int(round(source_fps / sample_fps)))


def list_frames(directory) -> list[Path]:
    """Frame files sorted by their numeric index."""
    directory = Path(directory)
    if not directory.is_dir():
        raise NoFrames(f"{directory} is not a directory")
    found = []
    for p in directory.iterdir():
        m = _FRAME_RE.search(p.name)
        if m and p.is_file():
            found.append((int(m.group(1)), p.name, p))
    found.sort()
    return [p for _, _, p in found]


def load_sequence(directory, source_fps: float, sample_fps: float = DEFAULT_SAMPLE_FPS) -> FrameSequence:
    """Load every ``round(source_fps / sample_fps)``-th frame starting at index 0.

    The returned ``sample_fps`` is the effective rate ``source_fps / step`` so
    that timestamps stay physical when the ratio is not an integer.
    """
    step = decimation_step(source_fps, sample_fps)
    if sample_fps < ALIASING_FLOOR_HZ:
        msg = f"sample rate {sample_fps} Hz is below the {ALIASING_FLOOR_HZ} Hz aliasing floor"
        log.warning(msg)
        warnings.warn(msg, AliasingWarning, stacklevel=2)
    paths = list_frames(directory)
    if len(paths) < 2:
        raise NoFrames(f"{directory}: need at least 2 frames, found {len(paths)}")
    kept = list(range(0, len(paths), step))
    if len(kept) < 2:
        raise NoFrames(f"{directory}: only {len(kept)} frame(s) survive decimation by {step}")
    frames = []
    for i in kept:
        img = read_image(paths[i])
        if frames and img.shape != frames[0].shape:
            raise MixedGeometry(f"{paths[i]} is {img.shape[1]}x{img.shape[0]}, "
                                f"expected {frames[0].shape[1]}x{frames[0].shape[0]}")
        frames.append(img)
    eff = source_fps / step
    return FrameSequence(frames, float(source_fps), eff, np.arange(len(frames)) / eff, kept)


def save_sequence(directory, frames, fmt: str = "png") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for i, img in enumerate(frames):
        p = directory / f"frame_{i:06d}.{fmt}"
        write_image(p, img)
        out.append(p)
    return out
