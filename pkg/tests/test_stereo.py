import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import sad_disparity
from stereoplan.scenegen import GoalSpec, MarkerSpec, SceneSpec, _box, _crater, render_stereo
from stereoplan.stereo import (INVALID, BadWindow, DimensionMismatch, DisparityMap, StereoRig, ZeroDisparity,
                               block_match, colormap, depth_from_disparity, disparity_to_color, odd_window)


def shifted_pair(shift, h=40, w=120, seed=0):
    """Textured left image and a right image with content moved ``shift`` px left."""
    rng = np.random.default_rng(seed)
    left = rng.integers(0, 256, (h, w)).astype(np.uint8)
    right = np.zeros_like(left)
    right[:, :w - shift] = left[:, shift:]
    right[:, w - shift:] = rng.integers(0, 256, (h, shift))
    return left, right


def test_pure_shift_seven():
    left, right = shifted_pair(7)
    dm = block_match(left, right, 10, 50)
    assert dm.window == 11
    v = dm.d[dm.valid]
    assert v.size > 0 and np.all(v == 7)


def test_identical_images_give_zero():
    left, _ = shifted_pair(1)
    dm = block_match(left, left, 10, 50)
    assert dm.valid.any() and np.all(dm.d[dm.valid] == 0)


def test_matches_direct_sad_oracle():
    rng = np.random.default_rng(1)
    left = rng.integers(0, 256, (14, 40)).astype(np.uint8)
    right = np.roll(left, -3, axis=1)
    right[:, :5] = rng.integers(0, 256, (14, 5))
    dm = block_match(left, right, 5, 8, strip=4)
    want = sad_disparity(left, right, 5, 8)
    got = np.where(dm.valid, dm.d, -1)
    np.testing.assert_array_equal(got, want)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 50), st.integers(0, 10_000))
def test_pure_shift_property(s, seed):
    left, right = shifted_pair(s, h=24, w=140, seed=seed)
    dm = block_match(left, right, 10, 50)
    v = dm.d[dm.valid]
    assert v.size > 0 and np.all(v == s)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30))
def test_disparity_bounded_by_omega(seed, omega):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (20, 60)).astype(np.uint8)
    b = rng.integers(0, 256, (20, 60)).astype(np.uint8)
    dm = block_match(a, b, 5, omega)
    v = dm.d[dm.valid]
    assert np.all((v >= 0) & (v <= omega))


def test_left_columns_invalid():
    left, right = shifted_pair(5)
    dm = block_match(left, right, 10, 50)
    assert not dm.valid[:, :55].any()


def test_contract_errors():
    a = np.zeros((10, 10), np.uint8)
    with pytest.raises(DimensionMismatch):
        block_match(a, np.zeros((10, 11), np.uint8))
    with pytest.raises(BadWindow):
        block_match(a, a, window=1)
    with pytest.raises(ValueError):
        block_match(a, a, omega=0)
    assert odd_window(10) == 11 and odd_window(11) == 11


@pytest.mark.parametrize("d,z", [(5, 2.0), (10, 1.0)])
def test_depth_examples(d, z):
    assert depth_from_disparity(d, StereoRig(100, 0.05)) == pytest.approx(z)


def test_zero_disparity():
    with pytest.raises(ZeroDisparity):
        depth_from_disparity(0, StereoRig(100, 0.05))


@settings(max_examples=200, deadline=None)
@given(st.floats(1, 5000), st.floats(0.01, 5), st.floats(0.1, 1000))
def test_depth_round_trip(f, l, z):
    rig = StereoRig(f, l)
    back = depth_from_disparity(2 * f * l / z, rig)
    assert abs(back - z) / z <= 1e-9


def test_colormap_endpoints_and_invalid():
    d = np.array([[0, 50, 25, INVALID]], np.int16)
    rgb = disparity_to_color(DisparityMap(d, 50, 11))
    np.testing.assert_array_equal(rgb[0, 0], np.rint(colormap(0.0)))
    np.testing.assert_array_equal(rgb[0, 1], np.rint(colormap(1.0)))
    np.testing.assert_array_equal(rgb[0, 2], np.rint(colormap(0.5)))
    assert not rgb[0, 3].any()
    allbad = DisparityMap(np.full((4, 4), INVALID, np.int16), 50, 11)
    assert not disparity_to_color(allbad).any()


def test_csv_round_trip_and_gray():
    rng = np.random.default_rng(2)
    d = rng.integers(0, 51, (6, 7)).astype(np.int16)
    d[rng.random((6, 7)) < 0.3] = INVALID
    dm = DisparityMap(d, 50, 11)
    back = DisparityMap.from_csv(dm.to_csv(), 7, 6, 50, 11)
    np.testing.assert_array_equal(back.d, d)
    g = dm.to_gray()
    assert g.dtype == np.uint8 and np.all(g[~dm.valid] == 0)


def test_box_higher_crater_lower_than_ground():
    spec = SceneSpec("probe", 400, 300, MarkerSpec(60, 240, 0.0, 2, 50), GoalSpec(340, 60, 20),
                     (_box(150, 60, 250, 140, 5.0), _crater(150, 180, 250, 260)), texture_seed=9)
    left, right, truth = render_stereo(spec)
    dm = block_match(left, right)
    ok = dm.valid
    box = np.zeros(ok.shape, bool)
    box[75:125, 165:235] = True
    pit = np.zeros(ok.shape, bool)
    pit[195:245, 165:235] = True
    ground = np.zeros(ok.shape, bool)
    ground[150:170, 100:380] = True
    mb, mp, mg = (dm.d[m & ok].mean() for m in (box, pit, ground))
    assert mb > mg > mp
