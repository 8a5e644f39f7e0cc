"""Parametric line intersection and segment collision queries.

A line through ``P`` at angle ``theta`` is ``L(lam) = P + lam * (cos theta, sin theta)``.
Two such lines meet where

    [cos t1  -cos t2] [lam1]   = P2 - P1
    [sin t1  -sin t2] [lam2]

and ``lam`` is measured in length units, so a segment of length ``L``
contains the point iff ``0 <= lam <= L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StereoPlanError

PARALLEL_EPS = 1e-9
# slack on the in-segment lambda test, relative to segment length
_LAMBDA_SLACK = 1e-9


class ParallelLines(StereoPlanError):
    pass


class DegenerateSegment(StereoPlanError):
    pass


@dataclass(frozen=True)
class Ray:
    origin: tuple[float, float]
    theta: float

    @property
    def direction(self) -> tuple[float, float]:
        return (math.cos(self.theta), math.sin(self.theta))

    def at(self, lam: float) -> tuple[float, float]:
        c, s = self.direction
        return (self.origin[0] + lam * c, self.origin[1] + lam * s)


@dataclass(frozen=True)
class Intersection:
    lambda1: float
    lambda2: float
    point: tuple[float, float]


@dataclass(frozen=True)
class LineSegment:
    head: tuple[float, float]
    tail: tuple[float, float]
    votes: int = 0
    source: str = field(default="terrain", compare=False)

    @property
    def length(self) -> float:
        return math.hypot(self.tail[0] - self.head[0], self.tail[1] - self.head[1])

    def ray(self) -> Ray:
        if self.length == 0:
            raise DegenerateSegment(f"segment {self.head} -> {self.tail} has zero length")
        return Ray(self.head, math.atan2(self.tail[1] - self.head[1], self.tail[0] - self.head[0]))


def ray_intersect(r1: Ray, r2: Ray) -> Intersection:
    c1, s1 = r1.direction
    c2, s2 = r2.direction
    det = -c1 * s2 + c2 * s1  # == sin(t1 - t2)
    if abs(det) <= PARALLEL_EPS:
        raise ParallelLines(f"rays are parallel (det={det:.3g})")
    bx = r2.origin[0] - r1.origin[0]
    by = r2.origin[1] - r1.origin[1]
    # explicit 2x2 inverse
    lam1 = (-s2 * bx + c2 * by) / det
    lam2 = (-s1 * bx + c1 * by) / det
    return Intersection(lam1, lam2, r1.at(lam1))


def _collinear_overlap(s1: LineSegment, s2: LineSegment) -> bool | None:
    """Return overlap for collinear segments, or None when not collinear."""
    hx, hy = s1.head
    dx, dy = s1.tail[0] - hx, s1.tail[1] - hy
    L = math.hypot(dx, dy)
    u = (dx / L, dy / L)
    scale = max(L, s2.length, 1.0)
    for p in (s2.head, s2.tail):
        cross = u[0] * (p[1] - hy) - u[1] * (p[0] - hx)
        if abs(cross) > 1e-9 * scale:
            return None
    a = u[0] * (s2.head[0] - hx) + u[1] * (s2.head[1] - hy)
    b = u[0] * (s2.tail[0] - hx) + u[1] * (s2.tail[1] - hy)
    lo, hi = min(a, b), max(a, b)
    slack = _LAMBDA_SLACK * scale
    return hi >= -slack and lo <= L + slack


def segments_intersect(s1: LineSegment, s2: LineSegment) -> bool:
    r1, r2 = s1.ray(), s2.ray()
    L1, L2 = s1.length, s2.length
    try:
        ix = ray_intersect(r1, r2)
    except ParallelLines:
        overlap = _collinear_overlap(s1, s2)
        return bool(overlap)
    e1 = _LAMBDA_SLACK * max(L1, 1.0)
    e2 = _LAMBDA_SLACK * max(L2, 1.0)
    return -e1 <= ix.lambda1 <= L1 + e1 and -e2 <= ix.lambda2 <= L2 + e2


def normalized_lambdas(s1: LineSegment, s2: LineSegment) -> tuple[float, float]:
    """Intersection parameters scaled so that [0, 1] spans each segment."""
    ix = ray_intersect(s1.ray(), s2.ray())
    return ix.lambda1 / s1.length, ix.lambda2 / s2.length


def _point_segment_distance(p, a, b) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / (dx * dx + dy * dy)
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def segment_distance(s1: LineSegment, s2: LineSegment) -> float:
    if s1.length == 0 or s2.length == 0:
        raise DegenerateSegment("segment_distance needs non-degenerate segments")
    if segments_intersect(s1, s2):
        return 0.0
    return min(
        _point_segment_distance(s1.head, s2.head, s2.tail),
        _point_segment_distance(s1.tail, s2.head, s2.tail),
        _point_segment_distance(s2.head, s1.head, s1.tail),
        _point_segment_distance(s2.tail, s1.head, s1.tail),
    )


# --- batched forms used by the planner -------------------------------------

def pairwise_blocked(p: np.ndarray, q: np.ndarray, obstacles: list[LineSegment],
                     clearance: float) -> np.ndarray:
    """Vectorized ``path_collides`` for many two-point paths.

    ``p`` and ``q`` are ``(m, 2)`` arrays of path-segment endpoints. Returns a
    boolean ``(m,)`` array, True where segment ``p[i] -> q[i]`` intersects an
    obstacle or passes closer than ``clearance`` to one. Uses the same
    lambda test and tolerances as :func:`segments_intersect`.
    """
    p = np.asarray(p, dtype=np.float64).reshape(-1, 2)
    q = np.asarray(q, dtype=np.float64).reshape(-1, 2)
    blocked = np.zeros(len(p), dtype=bool)
    if not obstacles or len(p) == 0:
        return blocked
    d = q - p
    L1 = np.hypot(d[:, 0], d[:, 1])
    nz = L1 > 0
    safe_L1 = np.where(nz, L1, 1.0)
    c1 = d[:, 0] / safe_L1
    s1 = d[:, 1] / safe_L1
    lo = np.minimum(p, q) - clearance
    hi = np.maximum(p, q) + clearance
    # pairs sorted by their left bound: each obstacle scans only a prefix
    alive = np.argsort(lo[:, 0], kind="stable")
    cols = [np.ascontiguousarray(c) for c in (lo[alive, 0], lo[alive, 1], hi[alive, 0], hi[alive, 1])]
    dead = 0
    # long obstacles first: they block the most pairs, shrinking later scans
    for ob in sorted(obstacles, key=lambda o: -o.length):
        if len(alive) == 0:
            break
        a = np.array(ob.head, dtype=np.float64)
        b = np.array(ob.tail, dtype=np.float64)
        L2 = ob.length
        if L2 == 0:
            raise DegenerateSegment("obstacle segment has zero length")
        olo, ohi = np.minimum(a, b), np.maximum(a, b)
        lox, loy, hix, hiy = cols
        k = int(np.searchsorted(lox, ohi[0], side="right"))
        live = (hix[:k] >= olo[0]) & (loy[:k] <= ohi[1]) & (hiy[:k] >= olo[1])
        idx = alive[:k][live]
        idx = idx[~blocked[idx]]
        if len(idx) == 0:
            continue
        pp, qq = p[idx], q[idx]
        hit = _batched_intersect(pp, c1[idx], s1[idx], L1[idx], nz[idx], a, b, L2)
        if clearance > 0:
            rest = ~hit
            if rest.any():
                pr, qr = pp[rest], qq[rest]
                near = np.minimum.reduce([
                    _batched_point_seg(pr, a, b),
                    _batched_point_seg(qr, a, b),
                    _batched_point_seg_many(a, pr, qr),
                    _batched_point_seg_many(b, pr, qr),
                ]) < clearance
                hit[rest] = near
        if hit.any():
            blocked[idx[hit]] = True
            dead += int(hit.sum())
            if dead > len(alive) // 4:
                keep = ~blocked[alive]
                alive = alive[keep]
                cols = [c[keep] for c in cols]
                dead = 0
    return blocked


def _batched_intersect(p, c1, s1, L1, nz, a, b, L2):
    c2 = (b[0] - a[0]) / L2
    s2 = (b[1] - a[1]) / L2
    det = -c1 * s2 + c2 * s1
    bx = a[0] - p[:, 0]
    by = a[1] - p[:, 1]
    par = np.abs(det) <= PARALLEL_EPS
    sdet = np.where(par, 1.0, det)
    lam1 = (-s2 * bx + c2 * by) / sdet
    lam2 = (-s1 * bx + c1 * by) / sdet
    e1 = _LAMBDA_SLACK * np.maximum(L1, 1.0)
    e2 = _LAMBDA_SLACK * max(L2, 1.0)
    hit = ~par & (lam1 >= -e1) & (lam1 <= L1 + e1) & (lam2 >= -e2) & (lam2 <= L2 + e2)
    if par.any():
        # collinear check along the path direction
        scale = np.maximum(np.maximum(L1, L2), 1.0)
        cr_a = c1 * (a[1] - p[:, 1]) - s1 * (a[0] - p[:, 0])
        cr_b = c1 * (b[1] - p[:, 1]) - s1 * (b[0] - p[:, 0])
        col = par & (np.abs(cr_a) <= 1e-9 * scale) & (np.abs(cr_b) <= 1e-9 * scale)
        ta = c1 * (a[0] - p[:, 0]) + s1 * (a[1] - p[:, 1])
        tb = c1 * (b[0] - p[:, 0]) + s1 * (b[1] - p[:, 1])
        slack = _LAMBDA_SLACK * scale
        ov = (np.maximum(ta, tb) >= -slack) & (np.minimum(ta, tb) <= L1 + slack)
        hit |= col & ov
    # zero-length path pieces: a point touching the obstacle
    if not nz.all():
        pt = _batched_point_seg(p, a, b) == 0
        hit = np.where(nz, hit, pt)
    return hit


def _batched_point_seg(pts, a, b):
    d = b - a
    t = ((pts[:, 0] - a[0]) * d[0] + (pts[:, 1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1])
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(pts[:, 0] - (a[0] + t * d[0]), pts[:, 1] - (a[1] + t * d[1]))


def _batched_point_seg_many(pt, a, b):
    d = b - a
    dd = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
    safe = np.where(dd > 0, dd, 1.0)
    t = ((pt[0] - a[:, 0]) * d[:, 0] + (pt[1] - a[:, 1]) * d[:, 1]) / safe
    t = np.clip(np.where(dd > 0, t, 0.0), 0.0, 1.0)
    return np.hypot(pt[0] - (a[:, 0] + t * d[:, 0]), pt[1] - (a[:, 1] + t * d[:, 1]))


def path_collides(waypoints, obstacles: list[LineSegment], clearance: float = 0.0) -> bool:
    """True iff any leg of the polyline hits or comes within ``clearance`` of an obstacle."""
    pts = np.asarray(waypoints, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise ValueError("a path needs at least two points")
    if clearance < 0:
        raise ValueError("clearance must be >= 0")
    return bool(pairwise_blocked(pts[:-1], pts[1:], obstacles, clearance).any())


def polyline_length(waypoints) -> float:
    pts = np.asarray(waypoints, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        return 0.0
    return float(np.hypot(*np.diff(pts, axis=0).T).sum())
