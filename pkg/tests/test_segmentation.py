import colorsys
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from divetrack.errors import ConfigError, GeometryMismatch, NoSubject
from divetrack.segmentation import (
    Component,
    HsvRange,
    annotate,
    barycenter,
    component_mask,
    connected_components,
    hsv_threshold,
    rgb_to_hsv,
    select_subject,
    subtract_background,
)
from divetrack.synth import ellipse_mask, hsv_to_rgb8

channel = st.integers(0, 255)


def flood_fill_components(mask):
    """Breadth-first 8-connected labelling, scanning seeds in row-major order."""
    h, w = mask.shape
    seen = np.zeros_like(mask)
    out = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            seen[y, x] = True
            q, comp = deque([(x, y)]), []
            while q:
                cx, cy = q.popleft()
                comp.append((cx, cy))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        nx, ny = cx + dx, cy + dy
                        if 0 <= nx < w and 0 <= ny < h and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            q.append((nx, ny))
            out.append(sorted(comp, key=lambda p: (p[1], p[0])))
    return out


# --- colour conversion -------------------------------------------------------

@pytest.mark.parametrize("rgb, hsv", [
    ((255, 0, 0), (0.0, 1.0, 1.0)),
    ((128, 128, 128), (0.0, 0.0, 128 / 255)),
    ((0, 255, 255), (180.0, 1.0, 1.0)),
    ((0, 0, 0), (0.0, 0.0, 0.0)),
])
def test_rgb_to_hsv_examples(rgb, hsv):
    assert rgb_to_hsv(*rgb) == pytest.approx(hsv)


@given(channel, channel, channel)
def test_rgb_to_hsv_matches_colorsys(r, g, b):
    h, s, v = rgb_to_hsv(r, g, b)
    hh, ss, vv = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
    assert s == pytest.approx(ss, abs=1e-12)
    assert v == pytest.approx(vv, abs=1e-12)
    if ss > 0:
        d = abs(h - 360 * hh) % 360
        assert min(d, 360 - d) < 1e-9


def test_rgb_to_hsv_vectorised(rng):
    img = rng.integers(0, 256, (7, 3))
    h, s, v = rgb_to_hsv(img[:, 0], img[:, 1], img[:, 2])
    for i, (r, g, b) in enumerate(img):
        assert (h[i], s[i], v[i]) == pytest.approx(rgb_to_hsv(r, g, b))


# --- thresholding ----------------------------------------------------------------

def test_hsv_range_validation():
    with pytest.raises(ConfigError):
        HsvRange(s_low=0.8, s_high=0.2)
    with pytest.raises(ConfigError):
        HsvRange(v_low=-0.1)
    with pytest.raises(ConfigError):
        HsvRange(h_low=360.0)


def test_full_range_accepts_everything(rng):
    img = rng.integers(0, 256, (20, 20, 3), dtype=np.uint8)
    assert hsv_threshold(img, HsvRange.full()).all()


def test_wrapped_hue_range():
    rng_ = HsvRange(350.0, 10.0, 0.0, 1.0, 0.0, 1.0)
    img = np.array([[hsv_to_rgb8(5, 1, 1), hsv_to_rgb8(180, 1, 1), hsv_to_rgb8(355, 1, 1)]], np.uint8)
    assert rgb_to_hsv(*img[0, 0])[0] == pytest.approx(5, abs=0.5)
    assert hsv_threshold(img, rng_).tolist() == [[True, False, True]]


def test_skin_ellipse_on_blue_recovered_exactly():
    m = ellipse_mask((60, 80), 40.0, 28.0, 15.0, 9.0)
    img = np.zeros((60, 80, 3), np.uint8)
    img[:] = hsv_to_rgb8(220, 0.8, 0.6)
    img[m] = hsv_to_rgb8(20, 0.5, 0.8)
    got = hsv_threshold(img, HsvRange(0, 40, 0.15, 0.9, 0.25, 1.0))
    np.testing.assert_array_equal(got, m)


img_strategy = arrays(np.uint8, (6, 6, 3))
ranges = st.tuples(st.floats(0, 359), st.floats(0, 359), st.floats(0, 0.5), st.floats(0.5, 1),
                   st.floats(0, 0.5), st.floats(0.5, 1))


@settings(max_examples=50, deadline=None)
@given(img_strategy, ranges, st.floats(0, 0.2))
def test_threshold_monotone_in_range(img, r, widen):
    narrow = HsvRange(*r)
    wide = HsvRange(narrow.h_low, narrow.h_high, max(narrow.s_low - widen, 0), min(narrow.s_high + widen, 1),
                    max(narrow.v_low - widen, 0), min(narrow.v_high + widen, 1))
    a = hsv_threshold(img, narrow)
    b = hsv_threshold(img, wide)
    assert not (a & ~b).any()
    # re-filtering only the accepted pixels accepts them all again
    if a.any():
        assert hsv_threshold(img[a][None], narrow).all()


# --- background subtraction ------------------------------------------------------

def square(shape, x, y, size):
    m = np.zeros(shape, bool)
    m[y:y + size, x:x + size] = True
    return m


def test_subtract_identical_is_empty():
    m = square((20, 20), 4, 4, 6)
    assert not subtract_background(m, m, 0).any()


def test_subtract_keeps_extra_blob():
    bg = square((30, 30), 2, 2, 5)
    blob = square((30, 30), 18, 18, 4)
    np.testing.assert_array_equal(subtract_background(bg | blob, bg, 0), blob)


def test_subtract_guard_absorbs_one_pixel_shift():
    frame = square((30, 30), 10, 10, 6)
    bg = square((30, 30), 11, 10, 6)
    assert subtract_background(frame, bg, 0).any()
    assert not subtract_background(frame, bg, 2).any()


def test_subtract_geometry_mismatch():
    with pytest.raises(GeometryMismatch):
        subtract_background(np.zeros((4, 4), bool), np.zeros((4, 5), bool))


@settings(max_examples=50, deadline=None)
@given(arrays(bool, (8, 9)), arrays(bool, (8, 9)), st.integers(0, 3))
def test_subtract_is_subset(frame, bg, g):
    out = subtract_background(frame, bg, g)
    assert not (out & ~frame).any()


# --- components ------------------------------------------------------------------

def test_components_examples():
    assert connected_components(np.zeros((5, 5), bool)) == []
    two = square((10, 12), 1, 1, 3) | square((10, 12), 7, 5, 3)
    comps = connected_components(two)
    assert [c.area for c in comps] == [9, 9]
    assert comps[0].bbox == (1, 1, 3, 3)
    diag = np.eye(6, dtype=bool)
    assert len(connected_components(diag)) == 1


@settings(max_examples=80, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_components_match_flood_fill(mask):
    got = [[tuple(p) for p in c.pixels.tolist()] for c in connected_components(mask)]
    assert got == flood_fill_components(mask)


def comp_at(x, y, w, h):
    return Component.from_pixels([(i, j) for j in range(y, y + h) for i in range(x, x + w)])


def test_select_largest():
    specks = [comp_at(40 + 3 * k, 0, 1, 5) for k in range(5)]
    big = comp_at(0, 10, 20, 20)
    assert select_subject(specks[:2] + [big] + specks[2:]) is big


def test_select_tie_prefers_previous():
    left, right = comp_at(0, 0, 10, 10), comp_at(50, 0, 10, 10)
    assert select_subject([left, right], previous=(10.0, 5.0)) is left
    assert select_subject([left, right], previous=(48.0, 5.0)) is right
    assert select_subject([right, left]) is right


def test_select_none_survive():
    with pytest.raises(NoSubject):
        select_subject([comp_at(0, 0, 3, 3)], min_area=50)
    with pytest.raises(NoSubject):
        select_subject([])


# --- barycentre ------------------------------------------------------------------

def test_barycenter_examples():
    assert barycenter(comp_at(0, 0, 10, 20)) == (4.5, 9.5)
    assert barycenter(Component.from_pixels([(7, 3)])) == (7.0, 3.0)
    pent = [(2, 1), (2, 2), (2, 3), (2, 4), (3, 4)]
    assert barycenter(Component.from_pixels(pent)) == (sum(p[0] for p in pent) / 5, sum(p[1] for p in pent) / 5)


@settings(max_examples=60, deadline=None)
@given(arrays(bool, (7, 7)), st.integers(-50, 50), st.integers(-50, 50))
def test_barycenter_in_bbox_and_equivariant(mask, dx, dy):
    for c in connected_components(mask):
        x, y = barycenter(c)
        x0, y0, x1, y1 = c.bbox
        assert x0 <= x <= x1 and y0 <= y <= y1
        moved = Component.from_pixels(c.pixels + (dx, dy))
        bx, by = barycenter(moved)
        assert bx == pytest.approx(x + dx, abs=1e-12)
        assert by == pytest.approx(y + dy, abs=1e-12)


def test_annotate_marks_contour_and_point():
    img = np.zeros((20, 20, 3), np.uint8)
    c = comp_at(5, 5, 8, 8)
    out = annotate(img, c, barycenter(c))
    assert (out[12, 12] == 255).all()
    assert tuple(out[9, 9]) == (255, 0, 0)
    assert (img == 0).all()
    np.testing.assert_array_equal(component_mask(c, (20, 20)), square((20, 20), 5, 5, 8))
