"""Full pipeline on the canned synthetic dive; writes panorama, trajectory, and error summary.

    python3 scripts/run_synth_pipeline.py --out runs/dive
"""
import argparse
import time
from pathlib import Path

import numpy as np

from divetrack import synth
from divetrack.cli import write_camera_path
from divetrack.config import PipelineConfig
from divetrack.pipeline import run_track
from divetrack.raster import write_image
from divetrack.tracking import export_plot, export_trajectory, metrics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/dive")
    ap.add_argument("--frames", type=int, default=60)
    ap.add_argument("--pan", type=float, default=300.0)
    ap.add_argument("--jitter", type=int, default=2)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--detector", default="doh")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    scene = synth.generate(synth.dive_scene(args.frames, args.pan, args.jitter, args.seed))
    cfg = PipelineConfig(detector=args.detector, threads=args.threads)
    t0 = time.perf_counter()
    res = run_track(scene.sequence.frames, scene.sequence.timestamps, cfg)
    elapsed = time.perf_counter() - t0

    mos = res.mosaic
    ref = mos.path.reference_index
    shift = np.array(mos.extent.origin_offset) - scene.truth_path[ref]
    truth = scene.truth_trajectory + shift
    valid = res.trajectory.valid
    raw_err = np.linalg.norm(res.trajectory.xy[valid] - truth[valid], axis=1)
    sm = res.trajectory.smoothed
    ok = ~np.isnan(sm[:, 0])
    sm_err = np.linalg.norm(sm[ok] - truth[ok], axis=1)
    dm = metrics(res.trajectory, synth.DIVE_WATER_LINE + shift[1])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_image(out / "panorama.png", mos.panorama.image)
    write_camera_path(out / "camera_path.csv", mos.path)
    export_trajectory(res.trajectory, out / "trajectory.csv")
    export_plot(res.trajectory, out / "plot.svg")

    b = synth.DIVE_BALLISTICS
    print(f"frames {len(scene.sequence)}  pipeline {elapsed:.1f} s  panorama {mos.extent.width}x{mos.extent.height}")
    print(f"camera RMSE        {synth.score(mos.displacement, scene.truth_path, ref):.3f} px")
    print(f"never written      {mos.panorama.unwritten_fraction():.4f}")
    print(f"valid samples      {valid.mean():.1%}")
    print(f"raw RMSE           {np.sqrt(np.mean(raw_err ** 2)):.3f} px")
    print(f"smoothed RMSE      {np.sqrt(np.mean(sm_err ** 2)):.3f} px")
    print(f"apex   {dm.apex_time:.3f} s (truth {b.apex_time:.3f}), height {dm.max_height_px:.2f} px "
          f"(truth {synth.DIVE_WATER_LINE - b.apex_y:.2f})")
    if dm.entry_time is not None:
        print(f"entry  {dm.entry_time:.3f} s (truth {b.crossing_time(synth.DIVE_WATER_LINE):.3f})")


if __name__ == "__main__":
    main()
