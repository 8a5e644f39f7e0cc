"""Occupancy-grid comparison planners: 8-connected A* and a seeded PRM.

Both see only the obstacle segments extracted from the intensity image,
never the disparity map.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import NoPath, StereoPlanError
from .geometry import LineSegment
from .planner import PlanResult

SQRT2 = math.sqrt(2.0)


class StartInObstacle(StereoPlanError):
    pass


class GoalInObstacle(StereoPlanError):
    pass


@dataclass
class OccupancyGrid:
    width: int
    height: int
    cell_size: int
    occupied: np.ndarray  # (height, width) bool

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Grid cell holding pixel (x, y)."""
        return (int(math.floor((x + 0.5) / self.cell_size)), int(math.floor((y + 0.5) / self.cell_size)))

    def center_px(self, cx: int, cy: int) -> tuple[float, float]:
        cs = self.cell_size
        return (cx * cs + (cs - 1) / 2.0, cy * cs + (cs - 1) / 2.0)

    def free(self, cx: int, cy: int) -> bool:
        return 0 <= cx < self.width and 0 <= cy < self.height and not self.occupied[cy, cx]

    def to_gray(self) -> np.ndarray:
        return np.where(self.occupied, 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class PrmConfig:
    n_samples: int = 500
    k_neighbors: int = 10
    seed: int = 42

    def __post_init__(self):
        if self.n_samples < 2 or self.k_neighbors < 1:
            raise ValueError("need n_samples >= 2 and k_neighbors >= 1")


class Lcg:
    """64-bit linear congruential generator (Knuth's MMIX constants).

    ``state <- 6364136223846793005 * state + 1442695040888963407 (mod 2**64)``;
    each draw returns the top 31 bits of the new state.
    """

    A = 6364136223846793005
    C = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next31(self) -> int:
        self.state = (self.A * self.state + self.C) & self.MASK
        return self.state >> 33

    def below(self, n: int) -> int:
        """Integer in [0, n) by fixed-point scaling of a 31-bit draw."""
        return (self.next31() * n) >> 31


def supercover(x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    """Every unit cell the continuous segment touches, in order.

    Coordinates are continuous cell units (cell (i, j) spans [i, i+1) x
    [j, j+1)). Where the segment passes exactly through a cell corner both
    side cells are included, so diagonal squeezes are never allowed.
    """
    dx, dy = x1 - x0, y1 - y0
    ts = [np.array([0.0, 1.0])]
    tx = ty = np.empty(0)
    if dx != 0:
        lo, hi = sorted((x0, x1))
        ks = np.arange(math.floor(lo) + 1, math.ceil(hi))
        tx = (ks - x0) / dx
        ts.append(tx)
    if dy != 0:
        lo, hi = sorted((y0, y1))
        ks = np.arange(math.floor(lo) + 1, math.ceil(hi))
        ty = (ks - y0) / dy
        ts.append(ty)
    t = np.unique(np.concatenate(ts))
    mids = 0.5 * (t[:-1] + t[1:]) if len(t) > 1 else t
    cells = np.stack([np.floor(x0 + mids * dx), np.floor(y0 + mids * dy)], axis=1).astype(np.int64)
    if len(tx) and len(ty):
        corner = np.intersect1d(np.round(tx, 12), np.round(ty, 12))
        corner = corner[(corner > 0) & (corner < 1)]
        if len(corner):
            sx, sy = np.sign(dx), np.sign(dy)
            cx = np.rint(x0 + corner * dx)
            cy = np.rint(y0 + corner * dy)
            # cells just before the corner, then the two side cells
            bx = cx - (sx > 0)
            by = cy - (sy > 0)
            extra = np.concatenate([
                np.stack([bx + sx, by], axis=1),
                np.stack([bx, by + sy], axis=1),
            ]).astype(np.int64)
            cells = np.concatenate([cells, extra])
    if len(cells) == 0:
        cells = np.array([[math.floor(x0), math.floor(y0)]], dtype=np.int64)
    return cells


def _segment_cells(seg: LineSegment, cs: int) -> np.ndarray:
    return supercover((seg.head[0] + 0.5) / cs, (seg.head[1] + 0.5) / cs,
                      (seg.tail[0] + 0.5) / cs, (seg.tail[1] + 0.5) / cs)


def rasterize_segments(segments, image_shape, cell_size: int = 1, inflation: int = 0,
                       start=None, goal=None) -> OccupancyGrid:
    if cell_size < 1 or inflation < 0:
        raise ValueError("cell_size must be >= 1 and inflation >= 0")
    h_px, w_px = image_shape
    gw, gh = math.ceil(w_px / cell_size), math.ceil(h_px / cell_size)
    occ = np.zeros((gh, gw), dtype=bool)
    for seg in segments:
        c = _segment_cells(seg, cell_size)
        ok = (c[:, 0] >= 0) & (c[:, 0] < gw) & (c[:, 1] >= 0) & (c[:, 1] < gh)
        occ[c[ok, 1], c[ok, 0]] = True
    grid = OccupancyGrid(gw, gh, cell_size, occ)
    pins = []
    for pt, err in ((start, StartInObstacle), (goal, GoalInObstacle)):
        if pt is None:
            continue
        cx, cy = grid.cell_of(*pt)
        if not (0 <= cx < gw and 0 <= cy < gh):
            raise err(f"point {pt} is outside the grid")
        if occ[cy, cx]:
            raise err(f"point {pt} lies on an obstacle segment")
        pins.append((cx, cy))
    if inflation > 0:
        # Chebyshev dilation: a square structuring element, applied per axis
        size = 2 * inflation + 1
        occ = ndimage.maximum_filter1d(occ, size, axis=0, mode="constant")
        occ = ndimage.maximum_filter1d(occ, size, axis=1, mode="constant")
    for cx, cy in pins:
        occ[cy, cx] = False
    grid.occupied = occ
    return grid


def rasterize(scene, cell_size: int = 1, inflation: int | None = None,
              sources: tuple[str, ...] = ("terrain",)) -> OccupancyGrid:
    """Occupancy grid of the scene's image-derived obstacle segments.

    ``inflation`` defaults to half the vehicle width in cells.
    """
    if inflation is None:
        inflation = int(math.ceil(scene.vehicle.width / 2.0 / cell_size))
    segs = [s for s in scene.obstacles if s.source in sources]
    return rasterize_segments(segs, scene.terrain.shape, cell_size, inflation,
                              (scene.start.x, scene.start.y), (scene.goal.x, scene.goal.y))


def octile(dx: int, dy: int) -> float:
    dx, dy = abs(dx), abs(dy)
    return (SQRT2 - 1.0) * min(dx, dy) + max(dx, dy)


def _result(grid: OccupancyGrid, cells, cost: float, t0: float, algorithm: str,
            considered: int, edges: int) -> PlanResult:
    pts = [grid.center_px(cx, cy) for cx, cy in cells]
    return PlanResult(pts, cost * grid.cell_size, time.perf_counter() - t0, considered, edges, algorithm)


def astar(grid: OccupancyGrid, start: tuple[int, int], goal: tuple[int, int]) -> PlanResult:
    """Optimal 8-connected grid path (costs 1 and sqrt 2, octile heuristic).

    A diagonal step is refused when both orthogonal cells beside it are
    occupied.
    """
    t0 = time.perf_counter()
    W, H = grid.width, grid.height
    if not grid.free(*start) or not grid.free(*goal):
        raise NoPath("start or goal cell is occupied")
    blocked = grid.occupied.ravel().tolist()
    s = start[1] * W + start[0]
    g = goal[1] * W + goal[0]
    gx, gy = goal
    k = SQRT2 - 1.0
    best = {s: 0.0}
    parent = {s: -1}
    closed = bytearray(W * H)
    h0 = octile(start[0] - gx, start[1] - gy)
    heap = [(h0, h0, s)]
    moves = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
             (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2))
    expanded = 0
    while heap:
        _, _, cur = heapq.heappop(heap)
        if closed[cur]:
            continue
        closed[cur] = 1
        expanded += 1
        if cur == g:
            break
        cy, cx = divmod(cur, W)
        gc = best[cur]
        for mx, my, mc in moves:
            nx, ny = cx + mx, cy + my
            if nx < 0 or ny < 0 or nx >= W or ny >= H:
                continue
            nb = ny * W + nx
            if blocked[nb] or closed[nb]:
                continue
            if mx and my and blocked[cy * W + nx] and blocked[ny * W + cx]:
                continue
            ng = gc + mc
            old = best.get(nb)
            if old is None or ng < old:
                best[nb] = ng
                parent[nb] = cur
                ddx, ddy = abs(nx - gx), abs(ny - gy)
                hh = k * ddy + ddx if ddx > ddy else k * ddx + ddy
                heapq.heappush(heap, (ng + hh, hh, nb))
    if g not in best or not closed[g]:
        raise NoPath("A*: goal unreachable")
    cells = []
    cur = g
    while cur != -1:
        cy, cx = divmod(cur, W)
        cells.append((cx, cy))
        cur = parent[cur]
    cells.reverse()
    return _result(grid, cells, best[g], t0, "astar", expanded, 0)


def line_free(grid: OccupancyGrid, a: tuple[int, int], b: tuple[int, int]) -> bool:
    c = supercover(a[0] + 0.5, a[1] + 0.5, b[0] + 0.5, b[1] + 0.5)
    ok = (c[:, 0] >= 0) & (c[:, 0] < grid.width) & (c[:, 1] >= 0) & (c[:, 1] < grid.height)
    if not ok.all():
        return False
    return not grid.occupied[c[:, 1], c[:, 0]].any()


def _group_ranks(counts: np.ndarray) -> np.ndarray:
    """0..c-1 for each group size c, concatenated."""
    total = int(counts.sum())
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total) - starts


def _crossing_cells(a0, a1, d0, d1, eid):
    """Cells beside every boundary crossing along axis 0 of center-to-center lines.

    ``a0/a1`` are the start cell coordinates on the crossing axis and the
    other axis, ``d0/d1`` the integer deltas. A crossing that lands exactly
    on a cell corner contributes all four cells around that corner.
    """
    n0 = np.abs(d0)
    keep = n0 > 0
    a0, a1, d0, d1, n0, eid = a0[keep], a1[keep], d0[keep], d1[keep], n0[keep], eid[keep]
    j = _group_ranks(n0)
    r = np.repeat(np.arange(len(n0)), n0)
    s0 = np.sign(d0)[r]
    num = (2 * a1[r] + 1) * n0[r] + (2 * j + 1) * d1[r]
    den = 2 * n0[r]
    f = num // den
    exact = num % den == 0
    before = a0[r] + s0 * j
    after = before + s0
    e = eid[r]
    c0 = [before, after, before[exact], after[exact]]
    c1 = [f, f, f[exact] - 1, f[exact] - 1]
    es = [e, e, e[exact], e[exact]]
    return np.concatenate(c0), np.concatenate(c1), np.concatenate(es)


def lines_blocked(grid: OccupancyGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Supercover test of many cell-center lines at once; True where any touched cell is occupied.

    Equivalent to ``not line_free`` for each pair, computed with exact
    integer arithmetic.
    """
    a = np.asarray(a, dtype=np.int64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.int64).reshape(-1, 2)
    m = len(a)
    d = b - a
    eid = np.arange(m)
    xs0, ys0, ex = _crossing_cells(a[:, 0], a[:, 1], d[:, 0], d[:, 1], eid)
    ys1, xs1, ey = _crossing_cells(a[:, 1], a[:, 0], d[:, 1], d[:, 0], eid)
    cx = np.concatenate([a[:, 0], b[:, 0], xs0, xs1])
    cy = np.concatenate([a[:, 1], b[:, 1], ys0, ys1])
    ce = np.concatenate([eid, eid, ex, ey])
    inside = (cx >= 0) & (cx < grid.width) & (cy >= 0) & (cy < grid.height)
    hit = np.ones(len(cx), dtype=bool)
    hit[inside] = grid.occupied[cy[inside], cx[inside]]
    return np.bincount(ce[hit], minlength=m) > 0


def prm_sample(grid: OccupancyGrid, cfg: PrmConfig) -> list[tuple[int, int]]:
    rng = Lcg(cfg.seed)
    seen = set()
    out = []
    attempts = 0
    limit = 100 * cfg.n_samples
    while len(out) < cfg.n_samples and attempts < limit:
        attempts += 1
        x = rng.below(grid.width)
        y = rng.below(grid.height)
        if grid.occupied[y, x] or (x, y) in seen:
            continue
        seen.add((x, y))
        out.append((x, y))
    return out


def prm(grid: OccupancyGrid, cfg: PrmConfig, start: tuple[int, int], goal: tuple[int, int]) -> PlanResult:
    """Seeded probabilistic roadmap with k-nearest connections and Dijkstra."""
    t0 = time.perf_counter()
    if not grid.free(*start) or not grid.free(*goal):
        raise NoPath("start or goal cell is occupied")
    nodes = [tuple(start), tuple(goal)]
    nodes += [p for p in prm_sample(grid, cfg) if p != nodes[0] and p != nodes[1]]
    pts = np.array(nodes, dtype=np.float64)
    k = min(cfg.k_neighbors, len(nodes) - 1)
    _, nbrs = cKDTree(pts).query(pts, k=k + 1)
    i = np.repeat(np.arange(len(nodes)), k + 1)
    j = nbrs.ravel()
    sel = i != j
    lo, hi = np.minimum(i[sel], j[sel]), np.maximum(i[sel], j[sel])
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    cells = np.array(nodes, dtype=np.int64)
    free = ~lines_blocked(grid, cells[pairs[:, 0]], cells[pairs[:, 1]])
    pairs = pairs[free]
    w = np.hypot(*(pts[pairs[:, 0]] - pts[pairs[:, 1]]).T)
    adj: list[list[tuple[float, int]]] = [[] for _ in nodes]
    for (u, v), wt in zip(pairs.tolist(), w.tolist()):
        adj[u].append((wt, v))
        adj[v].append((wt, u))
    n_edges = len(pairs)
    dist = {0: 0.0}
    parent = {0: -1}
    done = set()
    heap = [(0.0, 0)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == 1:
            break
        for w, v in adj[u]:
            nd = d + w
            if v not in done and nd < dist.get(v, math.inf):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    if 1 not in done:
        raise NoPath("PRM: roadmap does not connect start and goal")
    cells = []
    u = 1
    while u != -1:
        cells.append(nodes[u])
        u = parent[u]
    cells.reverse()
    return _result(grid, cells, dist[1], t0, "prm", len(nodes), n_edges)
