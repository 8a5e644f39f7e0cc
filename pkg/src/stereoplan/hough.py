"""Hough line segments, endpoint merging, and the circle Hough transform."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import StereoPlanError
from .geometry import LineSegment

R_MIN = 10
R_MAX = 40
SENSITIVITY = 0.9
RING_GAP = 3  # px between a candidate ring and the concentric rings it must beat


class BadRadii(StereoPlanError):
    pass


@dataclass(frozen=True)
class HoughLineConfig:
    rho_res: float = 1.0
    theta_res: float = math.pi / 180
    vote_threshold: int = 30
    min_len: float = 20.0
    max_gap: float = 5.0
    max_len: float | None = None  # longer segments are split into equal pieces

    def __post_init__(self):
        vals = [self.rho_res, self.theta_res, self.vote_threshold, self.min_len, self.max_gap]
        if any(not v > 0 for v in vals) or (self.max_len is not None and not self.max_len > 0):
            raise ValueError("all HoughLineConfig fields must be positive")

    @classmethod
    def for_vehicle(cls, length: float, width: float, **kw) -> "HoughLineConfig":
        """Tie the length limits to the vehicle footprint."""
        return cls(min_len=float(min(length, width)), max_len=4.0 * max(length, width), **kw)


@dataclass(frozen=True)
class CircleDetection:
    center: tuple[int, int]
    radius: int
    score: float


def _round_half_up(v):
    return np.floor(np.asarray(v, dtype=np.float64) + 0.5).astype(np.int64)


def hough_segments(edges: np.ndarray, cfg: HoughLineConfig = HoughLineConfig()) -> list[LineSegment]:
    """Extract line segments from a boolean edge map.

    Peaks of the (rho, theta) accumulator are taken strongest first. Edge
    pixels within one ``rho_res`` of the peak line are projected onto it and
    split into runs wherever consecutive projections are more than
    ``max_gap`` apart; runs of at least ``min_len`` become segments and their
    pixels stop voting.
    """
    edges = np.asarray(edges, dtype=bool)
    ys, xs = np.nonzero(edges)
    if len(xs) == 0:
        return []
    h, w = edges.shape
    thetas = np.arange(0.0, math.pi, cfg.theta_res)
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    diag = math.hypot(h, w)
    n_rho = int(math.ceil(2 * diag / cfg.rho_res)) + 1
    rho_off = n_rho // 2
    px = xs.astype(np.float64)
    py = ys.astype(np.float64)
    # rho index of every (pixel, theta) pair
    rho_idx = _round_half_up((np.outer(px, cos_t) + np.outer(py, sin_t)) / cfg.rho_res) + rho_off
    flat = rho_idx + np.arange(len(thetas))[None, :] * n_rho
    acc = np.bincount(flat.ravel(), minlength=len(thetas) * n_rho).astype(np.int64)
    alive = np.ones(len(xs), dtype=bool)
    exhausted = np.zeros_like(acc, dtype=bool)
    segments: list[LineSegment] = []
    while True:
        masked = np.where(exhausted, -1, acc)
        peak = int(np.argmax(masked))
        if masked[peak] < cfg.vote_threshold:
            break
        ti, ri = divmod(peak, n_rho)
        c, s = cos_t[ti], sin_t[ti]
        rho = (ri - rho_off) * cfg.rho_res
        idx = np.nonzero(alive)[0]
        dist = np.abs(px[idx] * c + py[idx] * s - rho)
        on = idx[dist <= cfg.rho_res]
        emitted = False
        if len(on):
            t = -px[on] * s + py[on] * c
            order = np.argsort(t, kind="stable")
            on, t = on[order], t[order]
            breaks = np.nonzero(np.diff(t) > cfg.max_gap)[0] + 1
            for run, tr in zip(np.split(on, breaks), np.split(t, breaks)):
                if tr[-1] - tr[0] < cfg.min_len:
                    continue
                head = (rho * c - tr[0] * s, rho * s + tr[0] * c)
                tail = (rho * c - tr[-1] * s, rho * s + tr[-1] * c)
                head = (int(_round_half_up(head[0])), int(_round_half_up(head[1])))
                tail = (int(_round_half_up(tail[0])), int(_round_half_up(tail[1])))
                head = (min(max(head[0], 0), w - 1), min(max(head[1], 0), h - 1))
                tail = (min(max(tail[0], 0), w - 1), min(max(tail[1], 0), h - 1))
                seg = LineSegment(head, tail, int(len(run)))
                if seg.length < cfg.min_len:
                    continue
                segments.append(seg)
                emitted = True
                alive[run] = False
                np.subtract.at(acc, flat[run].ravel(), 1)
        if not emitted:
            exhausted[peak] = True
    if cfg.max_len is not None:
        segments = split_long(segments, cfg.max_len)
    return segments


def split_long(segments: list[LineSegment], max_len: float) -> list[LineSegment]:
    """Cut segments longer than ``max_len`` into equal pieces."""
    out = []
    for sg in segments:
        pieces = int(math.ceil(sg.length / max_len)) if sg.length > max_len else 1
        if pieces == 1:
            out.append(sg)
            continue
        hx, hy = sg.head
        dx, dy = sg.tail[0] - hx, sg.tail[1] - hy
        pts = [(int(_round_half_up(hx + dx * k / pieces)), int(_round_half_up(hy + dy * k / pieces)))
               for k in range(pieces + 1)]
        for a, b in zip(pts[:-1], pts[1:]):
            if a != b:
                out.append(LineSegment(a, b, sg.votes // pieces, sg.source))
    return out


def merge_nodes(segments: list[LineSegment], merge_radius: float) -> list[LineSegment]:
    """Snap endpoints that chain within ``merge_radius`` onto their cluster centroid.

    Clustering is single-linkage and repeated until no two distinct nodes
    lie within the radius, so the operation is idempotent. Segments whose
    ends collapse onto one node are dropped, as are exact duplicates.
    """
    if merge_radius < 0:
        raise ValueError("merge_radius must be >= 0")
    if merge_radius == 0 or not segments:
        return list(segments)
    pts = np.array([p for sg in segments for p in (sg.head, sg.tail)], dtype=np.float64)
    while True:
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        inv = inv.ravel()
        pairs = cKDTree(uniq).query_pairs(merge_radius, output_type="ndarray")
        if len(pairs) == 0:
            break
        n_comp, labels = _components(len(uniq), pairs)
        # centroid over the original endpoint multiset
        sums = np.zeros((n_comp, 2))
        counts = np.zeros(n_comp)
        np.add.at(sums, labels[inv], pts)
        np.add.at(counts, labels[inv], 1)
        cent = _round_half_up(sums / counts[:, None]).astype(np.float64)
        multi = np.bincount(labels, minlength=n_comp)[labels[inv]] > 1
        pts = np.where(multi[:, None], cent[labels[inv]], pts)
    out = []
    seen = set()
    for k, sg in enumerate(segments):
        a = tuple(pts[2 * k])
        b = tuple(pts[2 * k + 1])
        if a == b:
            continue
        key = (a, b) if a <= b else (b, a)
        if key in seen:
            continue
        seen.add(key)
        moved_a = a != tuple(map(float, sg.head))
        moved_b = b != tuple(map(float, sg.tail))
        head = _as_point(a) if moved_a else sg.head
        tail = _as_point(b) if moved_b else sg.tail
        out.append(LineSegment(head, tail, sg.votes, sg.source))
    return out


def _as_point(p):
    return (int(p[0]), int(p[1])) if float(p[0]).is_integer() and float(p[1]).is_integer() else p


def _components(n: int, pairs: np.ndarray) -> tuple[int, np.ndarray]:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    m = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    return connected_components(m, directed=False)


def _ring_offsets(r: int) -> np.ndarray:
    n = int(math.ceil(2 * math.pi * r))
    a = 2 * math.pi * np.arange(n) / n
    off = np.stack([_round_half_up(r * np.cos(a)), _round_half_up(r * np.sin(a))], axis=1)
    return np.unique(off, axis=0)


def circle_coverage(edges: np.ndarray, a: float, b: float, r: float) -> float:
    """Fraction of the ideal perimeter that lands on edge pixels.

    The perimeter is sampled at ``ceil(2 pi r)`` equally spaced angles; a
    sample counts when the pixel at its rounded position is an edge pixel.
    Samples outside the image count as misses.
    """
    edges = np.asarray(edges, dtype=bool)
    return float(_coverage(edges, a, b, r))


def _hits(edges: np.ndarray, a, b, r, n: int) -> np.ndarray:
    """Edge hits at ``n`` equally spaced angles on the ring of radius ``r``."""
    h, w = edges.shape
    ang = 2 * math.pi * np.arange(n) / n
    x = _round_half_up(a + r * np.cos(ang))
    y = _round_half_up(b + r * np.sin(ang))
    inside = (x >= 0) & (x < w) & (y >= 0) & (y < h)
    hit = np.zeros(n, dtype=bool)
    hit[inside] = edges[y[inside], x[inside]]
    return hit


def _coverage(edges: np.ndarray, a, b, r) -> float:
    return _hits(edges, a, b, r, int(math.ceil(2 * math.pi * r))).mean()


def ring_support(edges: np.ndarray, a, b, r) -> tuple[float, float]:
    """Coverage of the ring and its support after the leaving penalty.

    An angle is "leaving" when the ring misses there but one of the rings
    ``RING_GAP`` px inside or outside hits: the curve that touched the ring
    veers away from it, as happens where a circle merely grazes another
    curve. Concentric double edges hit at the same angles and cost nothing.
    """
    n = int(math.ceil(2 * math.pi * r))
    on = _hits(edges, a, b, r, n)
    near = _hits(edges, a, b, r + RING_GAP, n)
    if r - RING_GAP > 0:
        near |= _hits(edges, a, b, r - RING_GAP, n)
    return float(on.mean()), float(on.mean() - (near & ~on).mean())


def score_threshold(sensitivity: float) -> float:
    """Map a (0, 1] sensitivity onto the minimum perimeter coverage."""
    if not 0 < sensitivity <= 1:
        raise ValueError("sensitivity must be in (0, 1]")
    return min(1.0, max(1e-6, 1.0 - sensitivity + 0.1))


def hough_circles(edges: np.ndarray, r_min: int = R_MIN, r_max: int = R_MAX,
                  sensitivity: float = SENSITIVITY, max_candidates: int = 200) -> list[CircleDetection]:
    """Two-phase circle Hough transform.

    Phase one votes for centres separately at every integer radius; phase
    two picks, for each surviving centre, the radius with the best
    perimeter coverage. A radius is accepted when both its coverage and its
    support after the leaving penalty reach the score threshold; the
    reported score is the plain coverage. Detections are then taken best first, and edge pixels
    on an accepted circle no longer count towards the later ones.
    """
    if not 0 < r_min < r_max:
        raise BadRadii(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    edges = np.asarray(edges, dtype=bool)
    score_min = score_threshold(sensitivity)
    h, w = edges.shape
    ys, xs = np.nonzero(edges)
    if len(xs) == 0:
        return []
    best_frac = np.zeros(h * w)
    for r in range(int(r_min), int(r_max) + 1):
        off = _ring_offsets(r)
        cx = (xs[:, None] - off[None, :, 0]).ravel()
        cy = (ys[:, None] - off[None, :, 1]).ravel()
        ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        votes = np.bincount(cy[ok] * w + cx[ok], minlength=h * w)
        np.maximum(best_frac, votes / len(off), out=best_frac)
    best_frac = best_frac.reshape(h, w)
    peaks = (best_frac == ndimage.maximum_filter(best_frac, size=5)) & (best_frac >= 0.5 * score_min)
    py, px = np.nonzero(peaks)
    order = np.lexsort((px, py, -best_frac[py, px]))[:max_candidates]
    radii = np.arange(int(r_min), int(r_max) + 1)

    def accepted(dil, a, b):
        cs = np.array([ring_support(dil, a, b, r) for r in radii])
        return cs[:, 0], (cs[:, 0] >= score_min) & (cs[:, 1] >= score_min)

    found: list[CircleDetection] = []
    for k in order:
        a, b = int(px[k]), int(py[k])
        cov, ok = accepted(edges, a, b)
        if not ok.any():
            continue
        top = cov[ok].max()
        tied = radii[ok & (cov >= top - 1e-12)]
        r = int(tied[(len(tied) - 1) // 2])
        found.append(CircleDetection((a, b), r, float(top)))
    found.sort(key=lambda d: (-d.score, d.center[1], d.center[0]))
    # greedy explain-away: edge pixels on an accepted circle stop supporting later ones
    remaining = edges.copy()
    kept: list[CircleDetection] = []
    for d in found:
        if any(math.hypot(d.center[0] - k.center[0], d.center[1] - k.center[1]) <= max(2.0, r_min / 2)
               for k in kept):
            continue
        if kept:
            cov, ok = accepted(remaining, *d.center)
            if not ok[d.radius - int(r_min)]:
                continue
        kept.append(d)
        ey, ex = np.nonzero(remaining)
        near = np.abs(np.hypot(ex - d.center[0], ey - d.center[1]) - d.radius) <= 1.5
        remaining[ey[near], ex[near]] = False
    return kept


def segments_to_csv(segments: list[LineSegment]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["hx", "hy", "tx", "ty", "votes"])
    for sg in segments:
        wr.writerow([f"{sg.head[0]:g}", f"{sg.head[1]:g}", f"{sg.tail[0]:g}", f"{sg.tail[1]:g}", sg.votes])
    return buf.getvalue()


def circles_to_csv(circles: list[CircleDetection]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["a", "b", "r", "score"])
    for c in circles:
        wr.writerow([c.center[0], c.center[1], c.radius, f"{c.score:.4f}"])
    return buf.getvalue()
