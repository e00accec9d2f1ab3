"""Command-line entry point: ``divetrack {mosaic,track,compare-detectors,metrics,synth}``.

Exit codes: 0 success, 1 usage/config error, 2 input error, 3 empty result.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, synth
from .config import PipelineConfig, load_config
from .errors import ConfigError, DiveTrackError, EmptyResult, InputError
from .ingest import load_sequence, save_sequence
from .pipeline import compare_detectors, run_mosaic, run_track
from .raster import write_gray16, write_image
from .segmentation import annotate
from .tracking import export_plot, export_trajectory, import_trajectory, metrics

log = logging.getLogger("divetrack")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_EMPTY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag name -> config key; None default means "not given, keep config value"
_CONFIG_FLAGS = {
    "--fps": ("fps", float, "source frame rate (Hz)"),
    "--sample-fps": ("sample_fps", float, "sampling rate (Hz), default 20"),
    "--detector": ("detector", str, "fast | harris | doh"),
    "--fast-threshold": ("fast_threshold", float, None),
    "--harris-k": ("harris_k", float, None),
    "--harris-rel-threshold": ("harris_rel_threshold", float, None),
    "--doh-threshold": ("doh_threshold", float, None),
    "--ratio": ("ratio", float, "descriptor ratio test"),
    "--ransac-iters": ("ransac_iters", int, None),
    "--ransac-tol": ("ransac_tol", float, "inlier tolerance (px)"),
    "--reference": ("reference", str, "middle | first | N"),
    "--seed": ("seed", int, None),
    "--h-low": ("h_low", float, None),
    "--h-high": ("h_high", float, None),
    "--s-low": ("s_low", float, None),
    "--s-high": ("s_high", float, None),
    "--v-low": ("v_low", float, None),
    "--v-high": ("v_high", float, None),
    "--guard-dilate": ("guard_dilate", int, None),
    "--min-area": ("min_area", int, None),
    "--max-gap": ("max_gap", int, None),
    "--window": ("window", int, "moving-average window (odd)"),
    "--water-line-y": ("water_line_y", float, "water line, panorama px"),
    "--px-per-meter": ("px_per_meter", float, None),
    "--threads": ("threads", int, "worker threads (outputs do not depend on it)"),
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", help="key = value config file")
    g.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    for flag, (key, typ, help_) in _CONFIG_FLAGS.items():
        g.add_argument(flag, dest=key, type=typ, default=None, help=help_)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="divetrack", description="Diver barycentre tracking from hand-held video frames")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mosaic", help="register frames and build the background panorama")
    p.add_argument("input_dir")
    p.add_argument("--out", default="out")
    _add_config_flags(p)

    p = sub.add_parser("track", help="full pipeline: panorama, segmentation, trajectory, metrics")
    p.add_argument("input_dir")
    p.add_argument("--out", default="out")
    p.add_argument("--annotate", action="store_true", help="write one annotated PNG per frame")
    _add_config_flags(p)

    p = sub.add_parser("compare-detectors", help="mean matched-feature count per detector")
    p.add_argument("input_dir")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    _add_config_flags(p)

    p = sub.add_parser("metrics", help="dive metrics from an exported trajectory CSV")
    p.add_argument("trajectory_csv")
    _add_config_flags(p)

    p = sub.add_parser("synth", help="write a synthetic dive scene with ground truth")
    p.add_argument("out_dir")
    p.add_argument("--kind", choices=("dive", "jitter", "static"), default="dive")
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--pan", type=float, default=300.0)
    p.add_argument("--jitter", type=int, default=2)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--fps", type=float, default=20.0)
    p.add_argument("--no-subject", action="store_true")
    p.add_argument("--format", choices=("png", "ppm"), default="png")
    return parser


def _config_from_args(args) -> PipelineConfig:
    overrides = {key: getattr(args, key) for key, *_ in _CONFIG_FLAGS.values()}
    return load_config(args.config, **overrides)


def _load_frames(args, cfg: PipelineConfig):
    seq = load_sequence(args.input_dir, cfg.fps, cfg.sample_fps)
    log.info("loaded %d frames from %s", len(seq), args.input_dir)
    return seq


def write_camera_path(path_file, camera_path) -> None:
    with open(path_file, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "tx_px", "ty_px", "a11", "a12", "a21", "a22"])
        for k, t in enumerate(camera_path.to_global):
            w.writerow([k, repr(t.tx), repr(t.ty), repr(t.a11), repr(t.a12), repr(t.a21), repr(t.a22)])


def cmd_mosaic(args, cfg: PipelineConfig) -> int:
    seq = _load_frames(args, cfg)
    res = run_mosaic(seq.frames, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_image(out / "panorama.png", res.panorama.image)
    write_gray16(out / "coverage.png", res.panorama.coverage)
    write_camera_path(out / "camera_path.csv", res.path)
    with open(out / "camera_displacement.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "dx_px", "dy_px"])
        for k, (dx, dy) in enumerate(res.displacement):
            w.writerow([k, repr(float(dx)), repr(float(dy))])
    print(f"panorama {res.extent.width}x{res.extent.height}, origin_offset={res.extent.origin_offset}, "
          f"never_written={res.panorama.unwritten_fraction():.4f}")
    return EXIT_OK


def cmd_track(args, cfg: PipelineConfig) -> int:
    seq = _load_frames(args, cfg)
    res = run_track(seq.frames, seq.timestamps, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_trajectory(res.trajectory, out / "trajectory.csv")
    export_plot(res.trajectory, out / "plot.svg")
    water = cfg.water_line_y
    if water is None:
        water = float(res.mosaic.extent.height - 1)  # panorama bottom row
    dm = res.metrics if res.metrics is not None else metrics(res.trajectory, water, cfg.px_per_meter)
    report = f"water_line_y={water:.6f}\n" + dm.report()
    (out / "metrics.txt").write_text(report)
    sys.stdout.write(report)
    if args.annotate:
        adir = out / "annotated"
        adir.mkdir(exist_ok=True)
        for reg, comp, s in zip(res.mosaic.registered, res.subjects, res.samples):
            img = annotate(reg.full_pixels(), comp, (s.x, s.y) if s.valid else None)
            write_image(adir / f"frame_{reg.frame_index:06d}.png", img)
    return EXIT_OK


def cmd_compare_detectors(args, cfg: PipelineConfig) -> int:
    seq = _load_frames(args, cfg)
    counts = compare_detectors(seq.frames, cfg)
    lines = ["detector,mean_matches"] + [f"{d},{c:.3f}" for d, c in counts.items()]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_metrics(args, cfg: PipelineConfig) -> int:
    if cfg.water_line_y is None:
        raise ConfigError("metrics needs --water-line-y (or water_line_y in the config)")
    try:
        traj = import_trajectory(args.trajectory_csv)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read trajectory {args.trajectory_csv}: {exc}") from exc
    dm = metrics(traj, cfg.water_line_y, cfg.px_per_meter)
    sys.stdout.write(f"water_line_y={cfg.water_line_y:.6f}\n" + dm.report())
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.kind == "static":
        spec = synth.dive_scene(args.frames, pan=0.0, jitter=0, seed=args.seed, fps=args.fps,
                                subject=not args.no_subject)
    elif args.kind == "jitter":
        spec = synth.dive_scene(args.frames, pan=0.0, jitter=args.jitter, seed=args.seed, fps=args.fps,
                                subject=not args.no_subject)
    else:
        spec = synth.dive_scene(args.frames, pan=args.pan, jitter=args.jitter, seed=args.seed, fps=args.fps,
                                subject=not args.no_subject)
    scene = synth.generate(spec)
    out = Path(args.out_dir)
    save_sequence(out, scene.sequence.frames, args.format)
    with open(out / "truth_path.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "tx_px", "ty_px"])
        for k, (tx, ty) in enumerate(scene.truth_path):
            w.writerow([k, repr(float(tx)), repr(float(ty))])
    with open(out / "truth_traj.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "t_s", "x_px", "y_px"])
        for k, (t, (x, y)) in enumerate(zip(scene.sequence.timestamps, scene.truth_trajectory)):
            w.writerow([k, repr(float(t)), repr(float(x)), repr(float(y))])
    print(f"wrote {len(scene.sequence)} frames to {out}")
    return EXIT_OK


_COMMANDS = {
    "mosaic": cmd_mosaic,
    "track": cmd_track,
    "compare-detectors": cmd_compare_detectors,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args)
        cfg = _config_from_args(args)
        if args.dump_config:
            sys.stdout.write(cfg.dump())
            return EXIT_OK
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"divetrack: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyResult as exc:
        print(f"divetrack: empty result: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (InputError, DiveTrackError) as exc:
        print(f"divetrack: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
