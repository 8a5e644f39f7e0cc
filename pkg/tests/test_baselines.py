import math

import numpy as np
import pytest

from conftest import assembled
from oracles import grid_dijkstra, touched_cells
from stereoplan.baselines import (GoalInObstacle, Lcg, OccupancyGrid, PrmConfig, StartInObstacle, astar,
                                  line_free, lines_blocked, octile, prm, prm_sample, rasterize,
                                  rasterize_segments, supercover)
from stereoplan.errors import NoPath
from stereoplan.geometry import LineSegment
from stereoplan.imgcore import load_pnm, save_pnm


def _grid(occ):
    occ = np.asarray(occ, bool)
    return OccupancyGrid(occ.shape[1], occ.shape[0], 1, occ)


def _wall_with_gap():
    occ = np.zeros((60, 60), bool)
    occ[:, 30] = True
    occ[28:33, 30] = False
    return _grid(occ)


def test_octile():
    assert octile(3, 3) == pytest.approx(3 * math.sqrt(2))
    assert octile(-5, 2) == pytest.approx(2 * math.sqrt(2) + 3)


@pytest.mark.parametrize("goal,cost", [((9, 9), 9 * math.sqrt(2)), ((9, 4), 4 * math.sqrt(2) + 5)])
def test_astar_empty_grid(goal, cost):
    res = astar(_grid(np.zeros((10, 10))), (0, 0), goal)
    assert res.length == pytest.approx(cost)
    assert res.waypoints[0] == (0, 0) and res.waypoints[-1] == goal
    assert res.algorithm == "astar"


def test_astar_refuses_diagonal_squeeze():
    occ = np.zeros((2, 2), bool)
    occ[0, 1] = occ[1, 0] = True
    with pytest.raises(NoPath):
        astar(_grid(occ), (0, 0), (1, 1))


def test_astar_occupied_endpoint():
    occ = np.zeros((5, 5), bool)
    occ[2, 2] = True
    with pytest.raises(NoPath):
        astar(_grid(occ), (2, 2), (0, 0))


def test_astar_matches_dijkstra_oracle():
    rng = np.random.default_rng(11)
    for _ in range(30):
        occ = rng.random((25, 25)) < 0.3
        occ[0, 0] = occ[24, 24] = False
        want = grid_dijkstra(occ, (0, 0), (24, 24))
        if math.isinf(want):
            with pytest.raises(NoPath):
                astar(_grid(occ), (0, 0), (24, 24))
            continue
        res = astar(_grid(occ), (0, 0), (24, 24))
        assert res.length == pytest.approx(want, abs=1e-9)
        cells = [tuple(map(int, p)) for p in res.waypoints]
        assert all(not occ[y, x] for x, y in cells)
        assert all(max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1 for a, b in zip(cells[:-1], cells[1:]))


def test_supercover_corner_takes_both_sides():
    cells = {tuple(c) for c in supercover(0.5, 0.5, 2.5, 2.5).tolist()}
    assert cells == {(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2)}


def test_supercover_matches_clipping_oracle():
    rng = np.random.default_rng(3)
    for _ in range(150):
        a, b = (tuple(int(v) for v in rng.integers(0, 10, 2)) for _ in range(2))
        got = {tuple(c) for c in supercover(a[0] + 0.5, a[1] + 0.5, b[0] + 0.5, b[1] + 0.5).tolist()}
        assert got == touched_cells(a, b, 10, 10)


def test_lines_blocked_matches_line_free():
    rng = np.random.default_rng(4)
    g = _grid(rng.random((40, 40)) < 0.05)
    a = rng.integers(0, 40, (400, 2))
    b = rng.integers(0, 40, (400, 2))
    got = lines_blocked(g, a, b)
    want = [not line_free(g, tuple(p), tuple(q)) for p, q in zip(a.tolist(), b.tolist())]
    np.testing.assert_array_equal(got, want)


def test_line_free_outside_grid():
    g = _grid(np.zeros((5, 5)))
    assert line_free(g, (0, 0), (4, 4))
    assert not line_free(g, (0, 0), (5, 4))


def test_rasterize_horizontal_wall():
    g = rasterize_segments([LineSegment((5, 10), (25, 10))], (20, 30))
    assert (g.width, g.height) == (30, 20)
    assert np.array_equal(np.nonzero(g.occupied[10])[0], np.arange(5, 26))
    assert g.occupied.sum() == 21


def test_rasterize_inflation_is_chebyshev_and_monotone():
    seg = [LineSegment((5, 10), (25, 10))]
    prev = None
    for k in range(4):
        occ = rasterize_segments(seg, (20, 30), inflation=k).occupied
        assert occ.sum() == (21 + 2 * k) * (1 + 2 * k)
        if prev is not None:
            assert np.all(occ[prev])
        prev = occ


def test_rasterize_cell_size():
    g = rasterize_segments([LineSegment((0, 0), (9, 0))], (10, 10), cell_size=5)
    assert (g.width, g.height) == (2, 2)
    assert g.occupied[0].all() and not g.occupied[1].any()
    assert g.cell_of(7, 7) == (1, 1) and g.center_px(1, 1) == (7.0, 7.0)


def test_endpoints_on_obstacles_are_errors():
    seg = [LineSegment((5, 10), (25, 10))]
    with pytest.raises(StartInObstacle):
        rasterize_segments(seg, (20, 30), start=(10, 10))
    with pytest.raises(GoalInObstacle):
        rasterize_segments(seg, (20, 30), start=(0, 0), goal=(25, 10))


def test_inflation_keeps_endpoint_cells_free():
    g = rasterize_segments([LineSegment((5, 10), (25, 10))], (20, 30), inflation=3, start=(10, 12))
    assert not g.occupied[12, 10] and g.occupied[12, 11]


def test_lcg_follows_documented_recurrence():
    rng = Lcg(42)
    state = 42
    for _ in range(5):
        state = (6364136223846793005 * state + 1442695040888963407) % 2**64
        assert rng.next31() == state // 2**33
    assert Lcg(1).below(10) == ((6364136223846793005 + 1442695040888963407) // 2**33 * 10) // 2**31


def test_prm_config_validation():
    with pytest.raises(ValueError):
        PrmConfig(1, 10)
    with pytest.raises(ValueError):
        PrmConfig(10, 0)


def test_prm_samples_are_free_and_distinct():
    g = _wall_with_gap()
    pts = prm_sample(g, PrmConfig(300, 10, 5))
    assert len(pts) == 300 == len(set(pts))
    assert not any(g.occupied[y, x] for x, y in pts)


def test_prm_deterministic():
    g = _wall_with_gap()
    a = prm(g, PrmConfig(300, 10, 7), (5, 30), (55, 30))
    b = prm(g, PrmConfig(300, 10, 7), (5, 30), (55, 30))
    assert a.waypoints == b.waypoints and a.length == b.length and a.graph_edges == b.graph_edges


def test_prm_wall_with_gap():
    g = _wall_with_gap()
    solved = 0
    for seed in range(50):
        try:
            res = prm(g, PrmConfig(300, 10, seed), (5, 30), (55, 30))
        except NoPath:
            continue
        solved += 1
        cells = [tuple(map(int, p)) for p in res.waypoints]
        # every leg is free, so the one crossing of column 30 goes through the gap
        assert all(line_free(g, a, b) for a, b in zip(cells[:-1], cells[1:]))
        assert res.length >= 50 - 1e-9
        assert res.length == pytest.approx(sum(math.dist(a, b) for a, b in zip(cells[:-1], cells[1:])))
    assert solved >= 40


def test_prm_disconnected():
    occ = np.zeros((30, 30), bool)
    occ[:, 15] = True
    with pytest.raises(NoPath):
        prm(_grid(occ), PrmConfig(100, 10, 1), (2, 2), (27, 27))


def test_preset_grid_plans_are_free(tmp_path):
    scene = assembled("scene2")
    g = rasterize(scene)
    assert g.occupied.shape == scene.terrain.shape
    s, t = g.cell_of(*scene.start.xy), g.cell_of(*scene.goal.xy)
    a = astar(g, s, t)
    p = prm(g, PrmConfig(), s, t)
    for res in (a, p):
        cells = [tuple(map(int, q)) for q in res.waypoints]
        assert cells[0] == s and cells[-1] == t
        assert res.length >= math.dist(s, t) - 1e-9
    # A* steps between free 8-neighbours, PRM legs pass the supercover test
    cells = [tuple(map(int, q)) for q in a.waypoints]
    assert all(g.free(*c) for c in cells)
    assert all(max(abs(u[0] - v[0]), abs(u[1] - v[1])) == 1 for u, v in zip(cells[:-1], cells[1:]))
    cells = [tuple(map(int, q)) for q in p.waypoints]
    assert all(line_free(g, u, v) for u, v in zip(cells[:-1], cells[1:]))
    save_pnm(g.to_gray(), tmp_path / "grid.pgm")
    back = load_pnm(tmp_path / "grid.pgm")
    np.testing.assert_array_equal(back == 0, g.occupied)
