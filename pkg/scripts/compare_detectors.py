"""Matched-feature counts per detector over a sweep of synthetic scenes.

The ordering is whatever comes out; nothing here asserts a winner.
"""
import argparse

import numpy as np

from divetrack import synth
from divetrack.config import PipelineConfig
from divetrack.pipeline import compare_detectors


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--frames", type=int, default=4)
    ap.add_argument("--pan", type=float, default=30.0)
    args = ap.parse_args()

    cfg = PipelineConfig()
    table = {}
    for seed in args.seeds:
        scene = synth.generate(synth.dive_scene(args.frames, args.pan, 2, seed))
        for det, c in compare_detectors(scene.sequence.frames, cfg).items():
            table.setdefault(det, []).append(c)
    print("detector,mean_matches,std")
    for det, vals in table.items():
        print(f"{det},{np.mean(vals):.1f},{np.std(vals):.1f}")


if __name__ == "__main__":
    main()
