import csv

import numpy as np
import pytest

from divetrack import synth
from divetrack.cli import main
from divetrack.config import PipelineConfig, load_config, parse_config_text
from divetrack.errors import ConfigError
from divetrack.ingest import save_sequence
from divetrack.pipeline import detect_and_describe
from divetrack.registration import match_descriptors


@pytest.fixture(scope="module")
def dive_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("dive")
    assert main(["synth", str(out), "--frames", "8", "--pan", "40", "--seed", "5"]) == 0
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_synth_writes_frames_and_truth(dive_dir):
    assert len(list(dive_dir.glob("frame_*.png"))) == 8
    assert read_csv(dive_dir / "truth_path.csv")[0] == ["frame", "tx_px", "ty_px"]
    assert len(read_csv(dive_dir / "truth_traj.csv")) == 9


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["mosaic", str(tmp_path), "--window", "4"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["mosaic", str(tmp_path), "--no-such-flag"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
    assert main(["metrics", str(tmp_path / "t.csv")]) == 1  # water line missing


def test_single_frame_exits_2(tmp_path, capsys):
    save_sequence(tmp_path, [np.zeros((32, 32, 3), np.uint8)])
    assert main(["mosaic", str(tmp_path)]) == 2
    assert "need at least 2 frames" in capsys.readouterr().err


def test_missing_dir_exits_2(tmp_path):
    assert main(["track", str(tmp_path / "nope")]) == 2


def test_dump_config_lists_defaults(capsys):
    assert main(["mosaic", "x", "--dump-config", "--ratio", "0.7"]) == 0
    text = capsys.readouterr().out
    cfg = parse_config_text(text)
    assert cfg["ratio"] == 0.7
    assert cfg["detector"] == "doh" and cfg["window"] == 5 and cfg["water_line_y"] is None
    assert set(cfg) == set(PipelineConfig.__dataclass_fields__)


def test_config_file_and_flag_precedence(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# tuned for a dark pool\nv_low = 0.1   # dim light\nwindow = 7\n\ndetector = harris\n")
    cfg = load_config(p, window=9)
    assert (cfg.v_low, cfg.window, cfg.detector) == (0.1, 9, "harris")
    p.write_text("bogus = 1\n")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("window\n")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


@pytest.mark.parametrize("bad", [dict(sample_fps=30.0), dict(detector="sift"), dict(s_low=0.9, s_high=0.1),
                                 dict(ratio=1.5), dict(min_area=0), dict(threads=0), dict(h_low=400.0)])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        load_config(**bad)


def test_compare_detectors_uniform_frames_zero(tmp_path, capsys):
    frames = [np.full((64, 64, 3), 120, np.uint8)] * 3
    save_sequence(tmp_path / "u", frames)
    assert main(["compare-detectors", str(tmp_path / "u"), "--out", str(tmp_path / "c.csv")]) == 0
    rows = read_csv(tmp_path / "c.csv")
    assert rows[0] == ["detector", "mean_matches"]
    assert [(r[0], float(r[1])) for r in rows[1:]] == [("fast", 0.0), ("harris", 0.0), ("doh", 0.0)]


def test_compare_detectors_textured_pair(dive_dir, tmp_path):
    assert main(["compare-detectors", str(dive_dir), "--out", str(tmp_path / "c.csv")]) == 0
    rows = read_csv(tmp_path / "c.csv")[1:]
    assert [r[0] for r in rows] == ["fast", "harris", "doh"]
    assert all(float(r[1]) > 0 for r in rows)


@pytest.mark.parametrize("detector", ["fast", "harris", "doh"])
def test_self_match_on_duplicated_frame(detector):
    frame = synth.generate(synth.dive_scene(1, pan=0, jitter=0, subject=False, frame_size=(200, 150))).sequence.frames[0]
    kps, desc = detect_and_describe(frame, detector, PipelineConfig().detector_params)
    assert len(desc.bits) > 20
    m = match_descriptors(desc.bits, desc.bits, PipelineConfig().ratio)
    assert len(m) >= 0.9 * len(desc.bits)


def test_track_outputs_and_annotate(dive_dir, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["track", str(dive_dir), "--out", str(out), "--annotate"]) == 0
    assert len(read_csv(out / "trajectory.csv")) == 9
    assert "<svg" in (out / "plot.svg").read_text()
    report = (out / "metrics.txt").read_text()
    assert report.startswith("water_line_y=") and "apex_time_s=" in report
    assert len(list((out / "annotated").glob("frame_*.png"))) == 8
    # metrics subcommand reads the exported trajectory back
    assert main(["metrics", str(out / "trajectory.csv"), "--water-line-y", "300"]) == 0
    assert "max_height_px=" in capsys.readouterr().out


def test_mosaic_outputs(dive_dir, tmp_path):
    out = tmp_path / "m"
    assert main(["mosaic", str(dive_dir), "--out", str(out), "--threads", "2"]) == 0
    for name in ("panorama.png", "coverage.png", "camera_path.csv", "camera_displacement.csv"):
        assert (out / name).is_file()
    rows = read_csv(out / "camera_path.csv")
    assert rows[0] == ["frame", "tx_px", "ty_px", "a11", "a12", "a21", "a22"]
    assert len(rows) == 9


def test_threads_do_not_change_outputs(dive_dir, tmp_path):
    for n in ("1", "3"):
        assert main(["mosaic", str(dive_dir), "--out", str(tmp_path / n), "--threads", n]) == 0
    for name in ("panorama.png", "coverage.png", "camera_path.csv"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "3" / name).read_bytes()


def test_unmatched_colour_exits_3(dive_dir, tmp_path, capsys):
    code = main(["track", str(dive_dir), "--out", str(tmp_path / "e"), "--h-low", "300", "--h-high", "340"])
    assert code == 3
    assert "empty result" in capsys.readouterr().err
