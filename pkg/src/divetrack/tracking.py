"""Trajectory assembly, zero-phase smoothing, dive metrics, and export."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadWindow, NoValidSamples

DEFAULT_MAX_GAP = 3
DEFAULT_WINDOW = 5

CSV_COLUMNS = ("frame", "t_s", "x_px", "y_px", "valid", "interpolated", "x_smooth", "y_smooth", "area_px")


@dataclass(frozen=True)
class BarycenterSample:
    frame_index: int
    t: float
    x: float = math.nan
    y: float = math.nan
    valid: bool = False
    area: float = 0.0
    interpolated: bool = False


@dataclass
class Trajectory:
    samples: list[BarycenterSample]
    smoothed: np.ndarray = field(default=None)  # (N, 2), NaN where undefined

    def __post_init__(self):
        if self.smoothed is None:
            self.smoothed = np.full((len(self.samples), 2), np.nan)
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def valid(self) -> np.ndarray:
        return np.array([s.valid for s in self.samples], dtype=bool)

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples], dtype=np.float64)

    @property
    def xy(self) -> np.ndarray:
        return np.array([(s.x, s.y) for s in self.samples], dtype=np.float64).reshape(-1, 2)


def assemble(samples, max_gap: int = DEFAULT_MAX_GAP) -> Trajectory:
    """Fill interior runs of at most ``max_gap`` invalid samples by linear interpolation."""
    samples = sorted(samples, key=lambda s: s.frame_index)
    valid = [s.valid for s in samples]
    if not any(valid):
        raise NoValidSamples("no frame produced a barycentre")
    out = list(samples)
    i = 0
    n = len(samples)
    while i < n:
        if valid[i]:
            i += 1
            continue
        j = i
        while j < n and not valid[j]:
            j += 1
        # run is [i, j); fill only when bounded by valid samples on both sides
        if 0 < i and j < n and j - i <= max_gap:
            a, b = samples[i - 1], samples[j]
            for k in range(i, j):
                f = (samples[k].t - a.t) / (b.t - a.t)
                out[k] = replace(samples[k], x=a.x + f * (b.x - a.x), y=a.y + f * (b.y - a.y),
                                 area=a.area + f * (b.area - a.area), valid=True, interpolated=True)
        i = j
    return Trajectory(out)


def smooth(traj: Trajectory, window: int = DEFAULT_WINDOW) -> Trajectory:
    """Centred moving average; endpoint windows shrink symmetrically.

    Invalid samples are left out of every average and get NaN.
    """
    if window < 1 or window % 2 == 0:
        raise BadWindow(f"window must be odd and >= 1, got {window}")
    r = window // 2
    xy = traj.xy
    ok = traj.valid
    n = len(xy)
    out = np.full((n, 2), np.nan)
    for i in np.flatnonzero(ok):
        ri = min(r, i, n - 1 - i)
        sel = ok[i - ri:i + ri + 1]
        # deviations from the centre sample: a constant window returns it bit-exactly
        out[i] = xy[i] + (xy[i - ri:i + ri + 1][sel] - xy[i]).mean(axis=0)
    return Trajectory(list(traj.samples), out)


@dataclass
class DiveMetrics:
    max_height_px: float
    apex_time: float
    apex_index: int
    entry_x: float | None
    entry_time: float | None
    lateral_deviation_px: float
    no_apex: bool = False
    no_entry: bool = False
    px_per_meter: float | None = None

    @property
    def max_height_m(self) -> float | None:
        return None if self.px_per_meter is None else self.max_height_px / self.px_per_meter

    @property
    def lateral_deviation_m(self) -> float | None:
        return None if self.px_per_meter is None else self.lateral_deviation_px / self.px_per_meter

    def report(self) -> str:
        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, bool):
                return str(v).lower()
            return f"{v:.6f}" if isinstance(v, float) else str(v)

        rows = [
            ("max_height_px", self.max_height_px),
            ("max_height_m", self.max_height_m),
            ("apex_time_s", self.apex_time),
            ("apex_frame", self.apex_index),
            ("entry_x_px", self.entry_x),
            ("entry_time_s", self.entry_time),
            ("lateral_deviation_px", self.lateral_deviation_px),
            ("lateral_deviation_m", self.lateral_deviation_m),
            ("no_apex", self.no_apex),
            ("no_entry", self.no_entry),
        ]
        return "\n".join(f"{k}={fmt(v)}" for k, v in rows) + "\n"


def heights(traj: Trajectory, water_line_y: float) -> np.ndarray:
    """Height above the water line of each smoothed sample (image y grows down)."""
    return water_line_y - traj.smoothed[:, 1]


def metrics(traj: Trajectory, water_line_y: float, px_per_meter: float | None = None) -> DiveMetrics:
    """Apex, entry, and pre-apex lateral deviation from the smoothed series.

    A monotone height signal puts the apex at an endpoint and sets
    ``no_apex``; a trajectory that never crosses the water line after the
    apex sets ``no_entry``. Neither condition raises.
    """
    if px_per_meter is not None and not px_per_meter > 0:
        raise ValueError("px_per_meter must be positive")
    sm = traj.smoothed
    ok = ~np.isnan(sm[:, 1])
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        raise NoValidSamples("trajectory has no smoothed samples")
    t = traj.t
    h = heights(traj, water_line_y)
    apex = int(idx[np.argmax(h[idx])])
    no_apex = apex in (idx[0], idx[-1]) and idx.size > 1
    x0 = sm[idx[0], 0]
    pre = idx[idx <= apex]
    lateral = float(np.max(np.abs(sm[pre, 0] - x0)))

    entry_t = entry_x = None
    for a, b in zip(idx, idx[1:]):
        if a < apex or b != a + 1:  # crossings never bridge an unfilled gap
            continue
        if h[a] > 0 >= h[b]:
            f = h[a] / (h[a] - h[b])
            entry_t = float(t[a] + f * (t[b] - t[a]))
            entry_x = float(sm[a, 0] + f * (sm[b, 0] - sm[a, 0]))
            break
    return DiveMetrics(float(h[apex]), float(t[apex]), int(traj.samples[apex].frame_index),
                       entry_x, entry_t, lateral, bool(no_apex), entry_t is None, px_per_meter)


# --- export / import -----------------------------------------------------------

def _num(v) -> str:
    return repr(float(v))


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s, (xs, ys) in zip(traj.samples, traj.smoothed):
        w.writerow([s.frame_index, _num(s.t), _num(s.x), _num(s.y), int(s.valid), int(s.interpolated),
                    _num(xs), _num(ys), _num(s.area)])
    return buf.getvalue()


def export_trajectory(traj: Trajectory, path=None) -> str:
    text = trajectory_to_csv(traj)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def import_trajectory(source) -> Trajectory:
    """Parse CSV text or a path written by export_trajectory."""
    if isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != CSV_COLUMNS:
        raise ValueError(f"unexpected trajectory columns {tuple(rows[0].keys())}")
    samples = [BarycenterSample(int(r["frame"]), float(r["t_s"]), float(r["x_px"]), float(r["y_px"]),
                                r["valid"] == "1", float(r["area_px"]), r["interpolated"] == "1")
               for r in rows]
    sm = np.array([(float(r["x_smooth"]), float(r["y_smooth"])) for r in rows], dtype=np.float64).reshape(-1, 2)
    return Trajectory(samples, sm)


def export_plot(traj: Trajectory, path=None, width: int = 640, height: int = 360) -> str:
    """SVG of raw and smoothed vertical position against time."""
    t = traj.t
    raw = traj.xy[:, 1]
    sm = traj.smoothed[:, 1]
    finite = np.concatenate([raw[np.isfinite(raw)], sm[np.isfinite(sm)]])
    pad = 40
    t_lo, t_hi = (float(t.min()), float(t.max())) if len(t) else (0.0, 1.0)
    y_lo, y_hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    t_span = t_hi - t_lo or 1.0
    y_span = y_hi - y_lo or 1.0

    def px(tv, yv):
        # image y grows downward, and so does SVG y
        return (pad + (tv - t_lo) / t_span * (width - 2 * pad),
                pad + (yv - y_lo) / y_span * (height - 2 * pad))

    def series(values, sid, colour):
        dots = [f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2.5"/>'
                for cx, cy in (px(tv, yv) for tv, yv in zip(t, values) if np.isfinite(yv))]
        return f'<g id="{sid}" fill="{colour}">' + "".join(dots) + "</g>"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="12">time [s]</text>',
        f'<text x="12" y="{height / 2:.0f}" font-size="12" transform="rotate(-90 12 {height / 2:.0f})" '
        f'text-anchor="middle">barycentre y [px]</text>',
        series(raw, "raw", "blue"),
        series(sm, "smoothed", "red"),
        "</svg>",
    ]
    text = "\n".join(parts) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
