import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from divetrack import synth
from divetrack.errors import EmptyInput, GeometryMismatch
from divetrack.mosaic import (
    Extent,
    RegisteredFrame,
    build_panorama,
    composite_background,
    panorama_extent,
    project_frame,
    warp_frame,
)
from divetrack.registration import AffineTransform2D as A, CameraPath


def translations(offsets, reference_index=0):
    return CameraPath(reference_index, [A.translation(dx, dy) for dx, dy in offsets])


def truth_camera_path(scene, reference_index):
    # frame k shows background window at truth[k]; reference coords = bg - truth[ref]
    rel = scene.truth_path - scene.truth_path[reference_index]
    return translations(rel, reference_index)


def full_frame(extent, value, index=0):
    h, w = extent.shape
    return RegisteredFrame(index, 0, 0, np.full((h, w, 3), value, np.uint8), np.ones((h, w), bool), extent)


def test_extent_identity():
    e = panorama_extent(translations([(0, 0)] * 3), 640, 480)
    assert (e.width, e.height, e.origin_offset) == (640, 480, (0, 0))


def test_extent_pan():
    e = panorama_extent(translations([(0, 0), (50, 0), (100, 0)]), 640, 480)
    assert (e.width, e.height, e.origin_offset) == (740, 480, (0, 0))
    e = panorama_extent(translations([(-30, 5), (0, 0), (20, -7)], 1), 640, 480)
    assert (e.width, e.height, e.origin_offset) == (690, 492, (30, 7))


def test_identity_warp_is_exact(rng):
    img = rng.integers(0, 256, (30, 40, 3), dtype=np.uint8)
    e = Extent(40, 30, (0, 0))
    reg = warp_frame(img, A.identity(), e)
    assert reg.full_mask().all()
    np.testing.assert_array_equal(reg.full_pixels(), img)


def test_half_pixel_shift_averages_neighbours():
    ramp = np.tile((np.arange(20) * 10).astype(np.uint8)[None, :, None], (5, 1, 3))
    e = panorama_extent(translations([(0.5, 0)]), 20, 5)
    reg = warp_frame(ramp, A.translation(0.5, 0), e)
    # panorama x = frame x + 0.5 -> interior values are means of neighbours
    row = reg.full_pixels()[2, :, 0].astype(int)
    m = reg.full_mask()[2]
    xs = np.flatnonzero(m)
    assert len(xs) == 19
    for x in xs:
        u = x - e.origin_offset[0] - 0.5
        assert row[x] == round(10 * u)


def test_far_shift_leaves_mask_empty(rng):
    img = rng.integers(0, 256, (10, 10, 3), dtype=np.uint8)
    reg = warp_frame(img, A.translation(100, 0), Extent(10, 10, (0, 0)))
    assert not reg.full_mask().any()


def test_composite_single_frame_is_identity(rng):
    img = rng.integers(0, 256, (16, 24, 3), dtype=np.uint8)
    e = Extent(24, 16, (0, 0))
    pano = composite_background([warp_frame(img, A.identity(), e)])
    np.testing.assert_array_equal(pano.image, img)
    assert (pano.coverage == 1).all()


def _with_blob(base, y0, y1, x0, x1, value, index):
    f = RegisteredFrame(index, base.x0, base.y0, base.pixels.copy(), base.mask.copy(), base.extent)
    f.pixels[y0:y1, x0:x1] = value
    return f


def test_composite_removes_minority_blob():
    e = Extent(20, 12, (0, 0))
    base = full_frame(e, 80)
    frames = [base] * 5 + [_with_blob(base, 2, 6, 3, 9, 250, i) for i in (5, 6)]
    pano = composite_background(frames)
    assert (pano.image == 80).all()


def test_composite_keeps_majority_blob():
    e = Extent(20, 12, (0, 0))
    base = full_frame(e, 80)
    frames = [base] * 3 + [_with_blob(base, 2, 6, 3, 9, 250, i) for i in range(4)]
    pano = composite_background(frames)
    assert (pano.image[2:6, 3:9] == 250).all()
    assert (pano.image[7:, :] == 80).all()


def test_composite_lower_median_on_even_counts():
    e = Extent(2, 1, (0, 0))
    frames = [full_frame(e, v) for v in (10, 200, 30, 90)]
    assert (composite_background(frames).image == 30).all()


def test_composite_errors():
    with pytest.raises(EmptyInput):
        composite_background([])
    with pytest.raises(GeometryMismatch):
        composite_background([full_frame(Extent(4, 4, (0, 0)), 1), full_frame(Extent(5, 4, (0, 0)), 1)])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_composite_permutation_invariant(seed, n):
    r = np.random.default_rng(seed)
    e = Extent(9, 7, (0, 0))
    frames = []
    for i in range(n):
        f = full_frame(e, 0, i)
        f.pixels[:] = r.integers(0, 256, f.pixels.shape, dtype=np.uint8)
        f.mask[:] = r.random(f.mask.shape) < 0.7
        frames.append(f)
    a = composite_background(frames, rows_per_chunk=3)
    b = composite_background([frames[i] for i in r.permutation(n)])
    np.testing.assert_array_equal(a.image, b.image)
    np.testing.assert_array_equal(a.coverage, b.coverage)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
def test_composite_matches_per_pixel_median_oracle(seed, n):
    r = np.random.default_rng(seed)
    e = Extent(5, 4, (0, 0))
    frames = []
    for i in range(n):
        f = full_frame(e, 0, i)
        f.pixels[:] = r.integers(0, 256, f.pixels.shape, dtype=np.uint8)
        f.mask[:] = r.random(f.mask.shape) < 0.6
        frames.append(f)
    pano = composite_background(frames)
    for y in range(4):
        for x in range(5):
            for c in range(3):
                vals = sorted(int(f.pixels[y, x, c]) for f in frames if f.mask[y, x])
                want = vals[(len(vals) - 1) // 2] if vals else 0
                assert pano.image[y, x, c] == want


def test_static_scene_reproduces_frame():
    scene = synth.generate(synth.dive_scene(8, pan=0, jitter=0, subject=False, frame_size=(96, 64)))
    path = translations([(0, 0)] * 8, 4)
    pano, _ = build_panorama(scene.sequence.frames, path)
    diff = np.abs(pano.image.astype(int) - scene.sequence.frames[0].astype(int))
    assert diff.max() <= 2


def test_jitter_scene_mostly_written():
    scene = synth.generate(synth.dive_scene(20, pan=0, jitter=3, seed=11, subject=False, frame_size=(96, 64)))
    pano, _ = build_panorama(scene.sequence.frames, truth_camera_path(scene, 10))
    assert pano.unwritten_fraction() < 0.05


def test_reference_frame_lands_at_origin(rng):
    path = translations([(-12, 3), (0, 0), (9, -4)], 1)
    e = panorama_extent(path, 32, 24)
    img = rng.integers(0, 256, (24, 32, 3), dtype=np.uint8)
    reg = project_frame(1, path, e, img)
    ox, oy = e.origin_offset
    np.testing.assert_array_equal(reg.full_pixels()[oy:oy + 24, ox:ox + 32], img)
    assert reg.full_mask().sum() == 24 * 32
