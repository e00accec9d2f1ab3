"""Pipeline configuration: plain ``key = value`` text, ``#`` comments."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import features, registration, segmentation, tracking
from .errors import ConfigError
from .ingest import DEFAULT_SAMPLE_FPS
from .segmentation import HsvRange

_DEFAULT_HSV = HsvRange()


@dataclass(frozen=True)
class PipelineConfig:
    # ingest
    fps: float = 20.0
    sample_fps: float = DEFAULT_SAMPLE_FPS
    # features
    detector: str = "doh"
    fast_threshold: float = features.FAST_THRESHOLD
    harris_k: float = features.HARRIS_K
    harris_rel_threshold: float = features.HARRIS_REL_THRESHOLD
    doh_threshold: float = features.DOH_THRESHOLD
    # registration
    ratio: float = registration.DEFAULT_RATIO
    ransac_iters: int = registration.RANSAC_ITERS
    ransac_tol: float = registration.RANSAC_TOL
    reference: str = "middle"
    seed: int = 0
    # segmentation
    h_low: float = _DEFAULT_HSV.h_low
    h_high: float = _DEFAULT_HSV.h_high
    s_low: float = _DEFAULT_HSV.s_low
    s_high: float = _DEFAULT_HSV.s_high
    v_low: float = _DEFAULT_HSV.v_low
    v_high: float = _DEFAULT_HSV.v_high
    guard_dilate: int = segmentation.DEFAULT_GUARD_DILATE
    min_area: int = segmentation.DEFAULT_MIN_AREA
    # tracking
    max_gap: int = tracking.DEFAULT_MAX_GAP
    window: int = tracking.DEFAULT_WINDOW
    water_line_y: float | None = None
    px_per_meter: float | None = None
    # execution
    threads: int = 1

    @property
    def hsv_range(self) -> HsvRange:
        return HsvRange(self.h_low, self.h_high, self.s_low, self.s_high, self.v_low, self.v_high)

    @property
    def detector_params(self) -> dict:
        return {"fast_threshold": self.fast_threshold, "harris_k": self.harris_k,
                "harris_rel_threshold": self.harris_rel_threshold, "doh_threshold": self.doh_threshold}

    def validate(self) -> PipelineConfig:
        """Check every key against its module's preconditions; returns self."""
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.fps > 0, "fps must be positive")
        need(0 < self.sample_fps <= self.fps, "sample_fps must lie in (0, fps]")
        need(self.detector in features.DETECTORS, f"detector must be one of {features.DETECTORS}")
        need(0 < self.fast_threshold < 1, "fast_threshold must lie in (0, 1)")
        need(0.02 <= self.harris_k <= 0.15, "harris_k must lie in [0.02, 0.15]")
        need(0 < self.harris_rel_threshold < 1, "harris_rel_threshold must lie in (0, 1)")
        need(self.doh_threshold >= 0, "doh_threshold must be >= 0")
        need(0 < self.ratio <= 1, "ratio must lie in (0, 1]")
        need(self.ransac_iters >= 1, "ransac_iters must be >= 1")
        need(self.ransac_tol > 0, "ransac_tol must be positive")
        need(self.reference in ("middle", "first") or str(self.reference).lstrip("-").isdigit(),
             "reference must be middle, first, or a frame index")
        need(self.guard_dilate >= 0, "guard_dilate must be >= 0")
        need(self.min_area >= 1, "min_area must be >= 1")
        need(self.max_gap >= 0, "max_gap must be >= 0")
        need(self.window >= 1 and self.window % 2 == 1, "window must be odd and >= 1")
        need(self.px_per_meter is None or self.px_per_meter > 0, "px_per_meter must be positive")
        need(self.threads >= 1, "threads must be >= 1")
        self.hsv_range  # raises ConfigError on bad bounds
        return self

    def with_overrides(self, **values) -> PipelineConfig:
        return replace(self, **{k: _coerce(k, v) for k, v in values.items() if v is not None})

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'none' if v is None else v}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, value):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(value, str):
        return value
    text = value.strip()
    kind = _TYPES[key]
    if "None" in kind and text.lower() in ("none", ""):
        return None
    try:
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r}") from exc
    return text


def parse_config_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, **overrides) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = cfg.with_overrides(**parse_config_text(text))
    return cfg.with_overrides(**overrides).validate()
