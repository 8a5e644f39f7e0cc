"""Corner-waypoint planner: scene assembly, intersection-free graph, Dijkstra."""

from __future__ import annotations

import csv
import dataclasses
import heapq
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .edges import canny, step_response
from .errors import NoPath, StereoPlanError
from .features import Corner, FeaturePoint, Source, fast_detect, filter_candidates, merge_corner_sets, nms_corners
from .fiducial import MarkerPose, _disparity_value, detect_goal_circle, detect_marker, initial_point
from .geometry import LineSegment, pairwise_blocked, polyline_length
from .hough import R_MAX, R_MIN, SENSITIVITY, HoughLineConfig, hough_segments, merge_nodes, split_long
from .stereo import DisparityMap, block_match


class StereoFailure(StereoPlanError):
    pass


@dataclass(frozen=True)
class VehicleSpec:
    length: float = 40.0
    width: float = 24.0

    def __post_init__(self):
        if not (self.length >= self.width > 0):
            raise ValueError(f"need length >= width > 0, got {self.length}x{self.width}")


@dataclass(frozen=True)
class PipelineConfig:
    omega: int = 50
    window: int = 10
    canny_sigma: float = 1.4
    canny_low: float = 0.1  # relative, terrain image
    canny_high: float = 0.3
    fast_t: float = 20.0
    fast_t_disparity: float = 5.0
    fast_n: int = 12
    nms_radius: int = 3
    tol: float = 3.0  # disparity units
    vote_threshold: int = 30
    max_gap: float = 5.0
    merge_radius: float | None = None  # None: half the vehicle width
    candidate_cap: int = 500
    r_min: int = R_MIN
    r_max: int = R_MAX
    sensitivity: float = SENSITIVITY
    use_disparity: bool = True
    invalid_limit: float = 0.9

    @classmethod
    def from_mapping(cls, kv: dict) -> "PipelineConfig":
        """Build from string key/values, ignoring keys that are not fields."""
        kw = {}
        for f in dataclasses.fields(cls):
            if f.name not in kv or kv[f.name] is None:
                continue
            raw = kv[f.name]
            if f.name == "use_disparity":
                kw[f.name] = raw if isinstance(raw, bool) else str(raw).lower() in ("1", "true", "yes", "on")
            elif f.name in ("omega", "window", "fast_n", "nms_radius", "vote_threshold",
                            "candidate_cap", "r_min", "r_max"):
                kw[f.name] = int(raw)
            else:
                kw[f.name] = float(raw)
        return cls(**kw)


@dataclass
class PlanningScene:
    terrain: np.ndarray
    disparity: DisparityMap
    obstacles: list[LineSegment]
    start: FeaturePoint
    goal: FeaturePoint
    vehicle: VehicleSpec
    corners: list[Corner] = field(default_factory=list)
    marker: MarkerPose | None = None
    goal_radius: float = 0.0
    timings: dict = field(default_factory=dict)


@dataclass
class WaypointGraph:
    nodes: list[tuple[float, float]]  # index 0 start, 1 goal
    adjacency: list[list[tuple[float, int]]]
    n_edges: int
    candidates: list[FeaturePoint]
    elapsed: float = 0.0

    def edge_set(self) -> set[tuple[int, int]]:
        return {(i, j) for i, row in enumerate(self.adjacency) for _, j in row if i < j}


@dataclass
class PlanResult:
    waypoints: list[tuple[float, float]]
    length: float
    elapsed: float
    candidates_considered: int
    graph_edges: int
    algorithm: str = "proposed"

    def summary(self) -> str:
        return (f"algorithm={self.algorithm} length_px={self.length:.3f} elapsed_s={self.elapsed:.6f} "
                f"candidates={self.candidates_considered} edges={self.graph_edges}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y"])
        for x, y in self.waypoints:
            wr.writerow([f"{x:g}", f"{y:g}"])
        return buf.getvalue()


def _near(seg: LineSegment, c, r: float) -> bool:
    return all(math.hypot(p[0] - c[0], p[1] - c[1]) <= r for p in (seg.head, seg.tail))


def disparity_edges(dmap: DisparityMap, cfg: PipelineConfig) -> np.ndarray:
    """Depth discontinuities of at least ``tol`` disparity units."""
    high = cfg.tol * step_response(cfg.canny_sigma)
    return canny(dmap.filled(), cfg.canny_sigma, 0.5 * high, high)


def assemble_scene(left: np.ndarray, right: np.ndarray, vehicle: VehicleSpec = VehicleSpec(),
                   cfg: PipelineConfig = PipelineConfig()) -> PlanningScene:
    """Run the vision front end on a rectified pair."""
    tm = {}
    t = time.perf_counter()
    dmap = block_match(left, right, cfg.window, cfg.omega)
    tm["disparity"] = time.perf_counter() - t
    if dmap.invalid_fraction() > cfg.invalid_limit:
        raise StereoFailure(f"{dmap.invalid_fraction():.1%} of disparity pixels are INVALID")

    t = time.perf_counter()
    pose = detect_marker(left)
    start = initial_point(pose, dmap)
    circ = detect_goal_circle(left, cfg.r_min, cfg.r_max, cfg.sensitivity, cfg.canny_sigma)
    gx, gy = circ.center
    goal = FeaturePoint(int(gx), int(gy), _disparity_value(dmap, int(gx), int(gy)), "goal")
    tm["detect"] = time.perf_counter() - t

    t = time.perf_counter()
    hcfg = HoughLineConfig.for_vehicle(vehicle.length, vehicle.width,
                                       vote_threshold=cfg.vote_threshold, max_gap=cfg.max_gap)
    segs = [dataclasses.replace(s, source=Source.TERRAIN.value) for s in hough_segments(
        canny(left, cfg.canny_sigma, cfg.canny_low, cfg.canny_high, relative=True), hcfg)]
    if cfg.use_disparity:
        segs += [dataclasses.replace(s, source=Source.DISPARITY.value)
                 for s in hough_segments(disparity_edges(dmap, cfg), hcfg)]
    # the marker and goal drawings are not obstacles
    side = max(math.hypot(c[0] - pose.center[0], c[1] - pose.center[1]) for c in pose.corners)
    segs = [s for s in segs if not _near(s, pose.center, side + 4) and not _near(s, circ.center, circ.radius + 4)]
    segs = split_long(segs, hcfg.max_len)
    merge_r = vehicle.width / 2.0 if cfg.merge_radius is None else cfg.merge_radius
    obstacles = merge_nodes(segs, merge_r)
    tm["lines"] = time.perf_counter() - t

    t = time.perf_counter()
    c_terrain = nms_corners(fast_detect(left, cfg.fast_t, cfg.fast_n, Source.TERRAIN), cfg.nms_radius)
    corners = c_terrain
    if cfg.use_disparity:
        dgray = np.clip(dmap.filled(), 0, 255)
        c_disp = nms_corners(fast_detect(dgray, cfg.fast_t_disparity, cfg.fast_n, Source.DISPARITY),
                             cfg.nms_radius)
        corners = merge_corner_sets(c_terrain, c_disp, radius=2)
    tm["corners"] = time.perf_counter() - t

    return PlanningScene(np.asarray(left), dmap, obstacles, start, goal, vehicle, corners, pose,
                         float(circ.radius), tm)


def build_graph(scene: PlanningScene, tol: float = 3.0, cap: int = 500) -> WaypointGraph:
    """Nodes are start, goal and the depth-filtered corners; edges keep clearance."""
    t0 = time.perf_counter()
    ranked = sorted(scene.corners, key=lambda c: (-c.score, c.y, c.x))
    cands = filter_candidates(ranked, scene.disparity, scene.start, scene.goal, tol)
    if len(cands) > cap:
        cands = cands[:cap]
    s, g = scene.start.xy, scene.goal.xy
    nodes = [s, g] + [c.xy for c in cands if c.xy != s and c.xy != g]
    cands = [c for c in cands if c.xy != s and c.xy != g]
    pts = np.array(nodes, dtype=np.float64)
    n = len(nodes)
    iu, ju = np.triu_indices(n, k=1)
    clearance = scene.vehicle.width / 2.0
    blocked = pairwise_blocked(pts[iu], pts[ju], scene.obstacles, clearance)
    iu, ju = iu[~blocked], ju[~blocked]
    w = np.hypot(*(pts[iu] - pts[ju]).T)
    adj: list[list[tuple[float, int]]] = [[] for _ in range(n)]
    for i, j, d in zip(iu.tolist(), ju.tolist(), w.tolist()):
        adj[i].append((d, j))
        adj[j].append((d, i))
    return WaypointGraph(nodes, adj, len(iu), cands, time.perf_counter() - t0)


def shortest_path(graph: WaypointGraph, start: int = 0, goal: int = 1) -> PlanResult:
    """Dijkstra; equal lengths prefer fewer waypoints, then the smaller node sequence."""
    t0 = time.perf_counter()
    nodes = graph.nodes
    if start == goal or nodes[start] == nodes[goal]:
        return PlanResult([nodes[start]], 0.0, graph.elapsed + time.perf_counter() - t0,
                          len(graph.candidates), graph.n_edges)
    # labels are (length, hops, node sequence); the sequence is only rebuilt on exact ties
    best = {start: (0.0, 0)}
    parent = {start: -1}

    def seq(u):
        out = []
        while u != -1:
            out.append(nodes[u])
            u = parent[u]
        return out[::-1]

    done = set()
    heap = [(0.0, 0, start)]
    while heap:
        d, hops, u = heapq.heappop(heap)
        if u in done or (d, hops) != best[u]:
            continue
        done.add(u)
        if u == goal:
            pts = [tuple(map(float, q)) for q in seq(u)]
            return PlanResult(pts, polyline_length(pts), graph.elapsed + time.perf_counter() - t0,
                              len(graph.candidates), graph.n_edges)
        for w, v in graph.adjacency[u]:
            if v in done:
                continue
            lab = (d + w, hops + 1)
            old = best.get(v)
            if old is None or lab < old or (lab == old and seq(u) + [nodes[v]] < seq(v)):
                best[v] = lab
                parent[v] = u
                heapq.heappush(heap, (lab[0], lab[1], v))
    raise NoPath("start and goal are not connected")


def plan(left: np.ndarray, right: np.ndarray, vehicle: VehicleSpec = VehicleSpec(),
         cfg: PipelineConfig = PipelineConfig()) -> PlanResult:
    scene = assemble_scene(left, right, vehicle, cfg)
    return shortest_path(build_graph(scene, cfg.tol, cfg.candidate_cap))


# --- overlay ---------------------------------------------------------------

RED = (255, 0, 0)
GREEN = (0, 200, 0)
BLUE = (0, 0, 255)


def _put(img, x, y, color):
    h, w = img.shape[:2]
    if 0 <= x < w and 0 <= y < h:
        img[y, x] = color


def draw_line(img: np.ndarray, a, b, color, thick: int = 1) -> None:
    n = int(max(abs(b[0] - a[0]), abs(b[1] - a[1]))) + 1
    xs = np.rint(np.linspace(a[0], b[0], n)).astype(int)
    ys = np.rint(np.linspace(a[1], b[1], n)).astype(int)
    r = thick // 2
    for x, y in zip(xs, ys):
        for dy in range(-r, thick - r):
            for dx in range(-r, thick - r):
                _put(img, x + dx, y + dy, color)


def draw_plus(img, x, y, color, r: int = 3):
    for k in range(-r, r + 1):
        _put(img, x + k, y, color)
        _put(img, x, y + k, color)


def draw_asterisk(img, x, y, color, r: int = 3):
    draw_plus(img, x, y, color, r)
    for k in range(-r + 1, r):
        _put(img, x + k, y + k, color)
        _put(img, x + k, y - k, color)


def render_overlay(scene: PlanningScene, result: PlanResult | None = None,
                   candidates: list | None = None) -> np.ndarray:
    """RGB overlay: obstacles red, image corners green plus signs,
    disparity corners red asterisks, path blue."""
    g = np.asarray(scene.terrain, dtype=np.uint8)
    img = np.repeat(g[..., None], 3, axis=2).copy()
    for s in scene.obstacles:
        draw_line(img, s.head, s.tail, RED)
    pts = candidates if candidates is not None else scene.corners
    for c in pts:
        src = getattr(c, "source", "terrain")
        if Source(src) is Source.DISPARITY:
            draw_asterisk(img, c.x, c.y, RED)
        else:
            draw_plus(img, c.x, c.y, GREEN)
    if result is not None:
        wp = result.waypoints
        for a, b in zip(wp[:-1], wp[1:]):
            draw_line(img, a, b, BLUE, thick=3)
    return img
