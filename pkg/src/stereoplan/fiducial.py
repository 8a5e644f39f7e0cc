"""Square binary marker (start pose) and goal-circle detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .edges import canny
from .errors import StereoPlanError
from .features import FeaturePoint
from .geometry import ParallelLines, Ray, ray_intersect
from .hough import R_MAX, R_MIN, SENSITIVITY, CircleDetection, hough_circles

THRESH_WINDOW = 15
THRESH_OFFSET = 7
APPROX_TOL = 0.03
MIN_QUAD_AREA = 100.0
MIN_CELL_CONTRAST = 30.0


class NotFound(StereoPlanError):
    pass


class Ambiguous(StereoPlanError):
    pass


class GoalNotFound(StereoPlanError):
    pass


def _rotations(code: np.ndarray) -> list[np.ndarray]:
    return [np.rot90(code, k) for k in range(4)]


@dataclass(frozen=True)
class MarkerDictionary:
    grid: int
    codes: tuple[np.ndarray, ...]

    def __post_init__(self):
        for i, c in enumerate(self.codes):
            if c.shape != (self.grid, self.grid):
                raise ValueError(f"code {i} has shape {c.shape}")
            rots = _rotations(c)
            for k in (1, 2, 3):
                if np.array_equal(rots[0], rots[k]):
                    raise ValueError(f"code {i} is rotation-symmetric")
            for j in range(i):
                if any(np.array_equal(self.codes[j], r) for r in rots):
                    raise ValueError(f"codes {j} and {i} coincide under rotation")

    def __len__(self) -> int:
        return len(self.codes)

    def cells(self, marker_id: int) -> np.ndarray:
        """Full (grid + 2)^2 bit raster with the black border, 1 = white."""
        g = self.grid
        out = np.zeros((g + 2, g + 2), dtype=np.uint8)
        out[1:-1, 1:-1] = self.codes[marker_id]
        return out

    def dumps(self) -> str:
        lines = [f"# grid {self.grid}"]
        for i, c in enumerate(self.codes):
            lines.append(f"id {i}")
            lines.extend("".join(str(int(b)) for b in row) for row in c)
        return "\n".join(lines) + "\n"


def default_dictionary(grid: int = 4, size: int = 16, min_distance: int = 4) -> MarkerDictionary:
    """Deterministic dictionary: greedy pick from a fixed LCG stream of codes."""
    nbits = grid * grid
    state = 0x2545F491
    chosen: list[np.ndarray] = []
    tries = 0
    while len(chosen) < size:
        tries += 1
        if tries > 200000:
            raise RuntimeError("could not build marker dictionary")
        state = (1103515245 * state + 12345) & 0x7FFFFFFF
        word = (state >> 8) & ((1 << nbits) - 1)
        bits = np.array([(word >> k) & 1 for k in range(nbits)], dtype=np.uint8).reshape(grid, grid)
        ones = int(bits.sum())
        if not (nbits // 3 <= ones <= nbits - nbits // 3):
            continue
        rots = _rotations(bits)
        if min(int((rots[0] != rots[k]).sum()) for k in (1, 2, 3)) < min_distance:
            continue
        if any(int((r != c).sum()) < min_distance for c in chosen for r in rots):
            continue
        chosen.append(bits)
    return MarkerDictionary(grid, tuple(chosen))


@dataclass(frozen=True)
class MarkerPose:
    id: int
    center: tuple[float, float]
    yaw: float  # radians, image +x axis to the marker's top edge direction
    corners: tuple[tuple[float, float], ...] = ()

    def line(self) -> str:
        return f"{self.id},{self.center[0]:.2f},{self.center[1]:.2f},{math.degrees(self.yaw):.2f}"


def adaptive_threshold(image: np.ndarray, window: int = THRESH_WINDOW,
                       offset: float = THRESH_OFFSET) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    mean = ndimage.uniform_filter(img, size=window, mode="nearest")
    return img < mean - offset


def _approx_closed(poly: np.ndarray, eps: float) -> np.ndarray:
    """Douglas-Peucker on a closed polygon, anchored on its two farthest points."""
    n = len(poly)
    d = np.linalg.norm(poly[:, None] - poly[None], axis=2)
    i, j = np.unravel_index(np.argmax(d), d.shape)
    i, j = sorted((int(i), int(j)))

    def dp(pts):
        if len(pts) <= 2:
            return [pts[0]]
        a, b = pts[0], pts[-1]
        ab = b - a
        L = np.hypot(*ab)
        rel = pts[1:-1] - a
        dist = np.abs(ab[0] * rel[:, 1] - ab[1] * rel[:, 0]) / L if L > 0 else np.hypot(rel[:, 0], rel[:, 1])
        k = int(np.argmax(dist))
        if dist[k] > eps:
            return dp(pts[:k + 2]) + dp(pts[k + 1:])
        return [a]

    first = poly[i:j + 1]
    second = np.concatenate([poly[j:], poly[:i + 1]])
    return np.array(dp(first) + dp(second))


def _quad_candidates(image: np.ndarray) -> list[np.ndarray]:
    dark = adaptive_threshold(image)
    labels, n = ndimage.label(dark, structure=np.ones((3, 3), bool))
    quads = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        hgt = sl[0].stop - sl[0].start
        wid = sl[1].stop - sl[1].start
        if hgt * wid < MIN_QUAD_AREA:
            continue
        ys, xs = np.nonzero(labels[sl] == k)
        pts = np.stack([xs + sl[1].start, ys + sl[0].start], axis=1).astype(np.float64)
        if len(pts) < 8:
            continue
        try:
            hull = ConvexHull(pts)
        except QhullError:
            continue
        poly = pts[hull.vertices]
        per = float(np.sum(np.hypot(*np.diff(np.vstack([poly, poly[:1]]), axis=0).T)))
        approx = _approx_closed(poly, APPROX_TOL * per)
        if len(approx) != 4:
            continue
        area = 0.5 * abs(np.dot(approx[:, 0], np.roll(approx[:, 1], 1))
                         - np.dot(approx[:, 1], np.roll(approx[:, 0], 1)))
        if area < MIN_QUAD_AREA:
            continue
        c = approx.mean(axis=0)
        ang = np.arctan2(approx[:, 1] - c[1], approx[:, 0] - c[0])
        quads.append(approx[np.argsort(ang)])  # clockwise on screen (y down)
    return quads


def _homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    A, b = [], []
    for (u, v), (x, y) in zip(src, dst):
        A.append([u, v, 1, 0, 0, 0, -u * x, -v * x])
        A.append([0, 0, 0, u, v, 1, -u * y, -v * y])
        b.extend([x, y])
    h = np.linalg.solve(np.array(A, float), np.array(b, float))
    return np.append(h, 1.0).reshape(3, 3)


def _sample_cells(image: np.ndarray, quad: np.ndarray, n: int) -> np.ndarray:
    src = np.array([[0, 0], [n, 0], [n, n], [0, n]], dtype=np.float64)
    H = _homography(src, quad)
    sub = np.array([0.3, 0.5, 0.7])
    uu, vv = np.meshgrid(np.arange(n), np.arange(n))
    su, sv = np.meshgrid(sub, sub)
    u = (uu[..., None, None] + su).reshape(n, n, -1)
    v = (vv[..., None, None] + sv).reshape(n, n, -1)
    w = H[2, 0] * u + H[2, 1] * v + H[2, 2]
    x = (H[0, 0] * u + H[0, 1] * v + H[0, 2]) / w
    y = (H[1, 0] * u + H[1, 1] * v + H[1, 2]) / w
    h, wd = image.shape
    xi = np.clip(np.floor(x + 0.5).astype(int), 0, wd - 1)
    yi = np.clip(np.floor(y + 0.5).astype(int), 0, h - 1)
    return np.asarray(image, dtype=np.float64)[yi, xi].mean(axis=2)


def _decode(image, quad, dictionary: MarkerDictionary):
    n = dictionary.grid + 2
    for k in range(4):
        q = np.roll(quad, -k, axis=0)
        cells = _sample_cells(image, q, n)
        lo, hi = cells.min(), cells.max()
        if hi - lo < MIN_CELL_CONTRAST:
            return None
        bits = (cells > 0.5 * (lo + hi)).astype(np.uint8)
        border = np.concatenate([bits[0], bits[-1], bits[:, 0], bits[:, -1]])
        if border.any():
            return None
        payload = bits[1:-1, 1:-1]
        for mid, code in enumerate(dictionary.codes):
            if np.array_equal(payload, code):
                return mid, q
    return None


def _diagonal_center(q: np.ndarray) -> tuple[float, float]:
    a = Ray(tuple(q[0]), math.atan2(q[2][1] - q[0][1], q[2][0] - q[0][0]))
    b = Ray(tuple(q[1]), math.atan2(q[3][1] - q[1][1], q[3][0] - q[1][0]))
    try:
        p = ray_intersect(a, b).point
    except ParallelLines:
        p = tuple(q.mean(axis=0))
    return (float(p[0]), float(p[1]))


def detect_markers(image: np.ndarray, dictionary: MarkerDictionary | None = None) -> list[MarkerPose]:
    dictionary = dictionary or default_dictionary()
    found = []
    for quad in _quad_candidates(image):
        hit = _decode(image, quad, dictionary)
        if hit is None:
            continue
        mid, q = hit
        top = q[1] - q[0]
        yaw = math.atan2(top[1], top[0])
        found.append(MarkerPose(mid, _diagonal_center(q), yaw, tuple(map(tuple, q))))
    return found


def detect_marker(image: np.ndarray, dictionary: MarkerDictionary | None = None) -> MarkerPose:
    """Locate the single dictionary marker in ``image``."""
    found = detect_markers(image, dictionary)
    if not found:
        raise NotFound("no marker decoded")
    if len(found) > 1:
        raise Ambiguous(f"{len(found)} markers decoded: ids {[m.id for m in found]}")
    return found[0]


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def initial_point(pose: MarkerPose, disparity=None) -> FeaturePoint:
    x, y = _round_half_up(pose.center[0]), _round_half_up(pose.center[1])
    return FeaturePoint(x, y, _disparity_value(disparity, x, y), "start")


def _disparity_value(disparity, x: int, y: int) -> float:
    if disparity is None:
        return float("nan")
    if 0 <= y < disparity.height and 0 <= x < disparity.width and disparity.valid[y, x]:
        return float(disparity.d[y, x])
    v = disparity.sample(x, y, radius=max(2, disparity.window // 2))
    return float("nan") if v is None else v


def detect_goal_circle(image: np.ndarray, r_min: int = R_MIN, r_max: int = R_MAX,
                       sensitivity: float = SENSITIVITY, sigma: float = 1.4) -> CircleDetection:
    """Best-scoring circle in the image."""
    edges = canny(image, sigma, 0.1, 0.3, relative=True)
    found = hough_circles(edges, r_min, r_max, sensitivity)
    if not found:
        raise GoalNotFound("no circle within the radius limits")
    return found[0]


def detect_goal(image: np.ndarray, disparity=None, r_min: int = R_MIN, r_max: int = R_MAX,
                sensitivity: float = SENSITIVITY, sigma: float = 1.4) -> FeaturePoint:
    """Centre of the best-scoring circle, with its disparity when given a map."""
    a, b = detect_goal_circle(image, r_min, r_max, sensitivity, sigma).center
    return FeaturePoint(int(a), int(b), _disparity_value(disparity, int(a), int(b)), "goal")
