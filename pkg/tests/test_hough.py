import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereoplan.geometry import LineSegment
from stereoplan.hough import (BadRadii, HoughLineConfig, circle_coverage, circles_to_csv, hough_circles,
                              hough_segments, merge_nodes, score_threshold, segments_to_csv, split_long)


def _ends(seg):
    return sorted([tuple(seg.head), tuple(seg.tail)])


def test_empty_edges():
    assert hough_segments(np.zeros((50, 50), bool)) == []


def test_single_horizontal_row():
    e = np.zeros((60, 140), bool)
    e[30, 20:120] = True
    segs = hough_segments(e, HoughLineConfig(min_len=20))
    assert len(segs) == 1
    (a, b) = _ends(segs[0])
    assert math.dist(a, (20, 30)) <= 2 and math.dist(b, (119, 30)) <= 2
    ang = math.degrees(math.atan2(b[1] - a[1], b[0] - a[0])) % 180
    # the normal angle of a horizontal line is 90 degrees
    assert min(ang, 180 - ang) <= 1.0


@pytest.mark.parametrize("gap,n", [(10, 1), (3, 2)])
def test_gap_rule(gap, n):
    e = np.zeros((40, 120), bool)
    e[20, 10:50] = True
    e[20, 55:95] = True
    segs = hough_segments(e, HoughLineConfig(min_len=20, max_gap=gap))
    assert len(segs) == n


def test_config_validation_and_vehicle_coupling():
    with pytest.raises(ValueError):
        HoughLineConfig(vote_threshold=0)
    cfg = HoughLineConfig.for_vehicle(40, 24)
    assert cfg.min_len == 24 and cfg.max_len == 160


def test_split_long():
    seg = LineSegment((0, 0), (400, 0), 400)
    parts = split_long([seg], 160)
    assert len(parts) == 3
    assert parts[0].head == (0, 0) and parts[-1].tail == (400, 0)
    assert all(p.length <= 160 for p in parts)
    assert split_long([LineSegment((0, 0), (100, 0))], 160) == [LineSegment((0, 0), (100, 0))]


def _random_edges(seed):
    rng = np.random.default_rng(seed)
    e = np.zeros((80, 90), bool)
    for _ in range(3):
        x0, y0, x1, y1 = rng.integers(5, 75, 4)
        n = int(max(abs(x1 - x0), abs(y1 - y0))) + 1
        xs = np.rint(np.linspace(x0, x1, n)).astype(int)
        ys = np.rint(np.linspace(y0, y1, n)).astype(int)
        e[ys, xs] = True
    return e


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_segments_in_bounds_and_long_enough(seed):
    e = _random_edges(seed)
    cfg = HoughLineConfig(min_len=20, vote_threshold=15)
    for s in hough_segments(e, cfg):
        for x, y in (s.head, s.tail):
            assert 0 <= x < 90 and 0 <= y < 80
        assert s.length >= 20


def test_rotation_by_180_degrees():
    e = np.zeros((80, 90), bool)
    e[10, 10:70] = True
    e[15:70, 60] = True
    cfg = HoughLineConfig(min_len=20)
    a = hough_segments(e, cfg)
    b = hough_segments(e[::-1, ::-1], cfg)
    rot = [sorted([(89 - x, 79 - y) for x, y in (s.head, s.tail)]) for s in b]
    assert len(a) == len(b)
    for s in a:
        ends = _ends(s)
        assert any(all(math.dist(p, q) <= 1 for p, q in zip(ends, r)) for r in rot)


def test_merge_shared_endpoint():
    segs = [LineSegment((0, 0), (50, 0)), LineSegment((50, 0), (50, 50))]
    out = merge_nodes(segs, 5)
    assert len(out) == 2 and out[0].tail == out[1].head == (50, 0)


def test_merge_to_midpoint():
    segs = [LineSegment((0, 0), (50, 0)), LineSegment((53, 0), (53, 50))]
    out = merge_nodes(segs, 5)
    # centroid of (50, 0) and (53, 0) is 51.5, rounded half up
    assert out[0].tail == (52, 0) and out[1].head == (52, 0)


def test_merge_radius_zero_is_identity_and_collapse_dropped():
    segs = [LineSegment((0, 0), (50, 0)), LineSegment((53, 0), (53, 50))]
    assert merge_nodes(segs, 0) == segs
    assert merge_nodes([LineSegment((0, 0), (3, 0))], 5) == []
    with pytest.raises(ValueError):
        merge_nodes(segs, -1)


def test_merge_chains_single_linkage():
    segs = [LineSegment((0, 0), (0, 40)), LineSegment((4, 0), (40, 40)), LineSegment((8, 0), (80, 0))]
    out = merge_nodes(segs, 5)
    heads = {tuple(s.head) for s in out} | {tuple(s.tail) for s in out}
    assert (4, 0) in heads and (0, 0) not in heads and (8, 0) not in heads


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 60)] * 4), min_size=1, max_size=12), st.floats(0.5, 12))
def test_merge_idempotent(raw, r):
    segs = [LineSegment((a, b), (c, d)) for a, b, c, d in raw if (a, b) != (c, d)]
    once = merge_nodes(segs, r)
    assert merge_nodes(once, r) == once


def _ring(shape, a, b, r):
    e = np.zeros(shape, bool)
    t = np.linspace(0, 2 * math.pi, 1000, endpoint=False)
    e[np.rint(b + r * np.sin(t)).astype(int), np.rint(a + r * np.cos(t)).astype(int)] = True
    return e


def _brute_force_circle(e, r_min, r_max):
    """Exhaustive (a, b, r) coverage search over a coarse centre window."""
    best = (-1.0, None)
    for a in range(45, 56):
        for b in range(45, 56):
            for r in range(r_min, r_max + 1):
                c = circle_coverage(e, a, b, r)
                if c > best[0]:
                    best = (c, (a, b, r))
    return best


def test_circle_r20_found():
    e = _ring((100, 100), 50, 50, 20)
    found = hough_circles(e, 10, 40, 0.9)
    assert len(found) == 1
    d = found[0]
    assert math.dist(d.center, (50, 50)) <= 2 and abs(d.radius - 20) <= 2
    cov, (a, b, r) = _brute_force_circle(e, 10, 40)
    assert d.score == pytest.approx(cov, abs=0.02)
    assert math.dist(d.center, (a, b)) <= 2 and abs(d.radius - r) <= 2


def test_circle_outside_radius_range():
    e = _ring((140, 140), 70, 70, 50)
    assert hough_circles(e, 10, 40, 0.9) == []


def test_circle_defaults_and_errors():
    import inspect
    sig = inspect.signature(hough_circles).parameters
    assert (sig["r_min"].default, sig["r_max"].default, sig["sensitivity"].default) == (10, 40, 0.9)
    with pytest.raises(BadRadii):
        hough_circles(np.zeros((10, 10), bool), 40, 10)
    assert score_threshold(0.9) == pytest.approx(0.2)
    assert score_threshold(1.0) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        score_threshold(0)


@settings(max_examples=15, deadline=None)
@given(st.integers(30, 70), st.integers(30, 70), st.integers(12, 25))
def test_circle_score_is_recomputable(a, b, r):
    e = _ring((100, 100), a, b, r)
    for d in hough_circles(e, 10, 40, 0.9):
        assert circle_coverage(e, *d.center, d.radius) == pytest.approx(d.score, abs=0.02)
        assert 10 <= d.radius <= 40


def test_csv_formats():
    assert segments_to_csv([LineSegment((1, 2), (3, 4), 9)]) == "hx,hy,tx,ty,votes\n1,2,3,4,9\n"
    from stereoplan.hough import CircleDetection
    assert circles_to_csv([CircleDetection((5, 6), 20, 0.5)]).splitlines()[0] == "a,b,r,score"
