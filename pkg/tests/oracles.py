"""Independent reference implementations used to check the package.

Each one is written from the textbook definition with plain loops and no
code shared with ``stereoplan``.
"""

from __future__ import annotations

import heapq
import math
from fractions import Fraction

import numpy as np

RING = [
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
]


def naive_fast(img, t, n):
    """{(x, y): score} from the segment test, trying every arc start and length."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    out = {}
    for y in range(3, h - 3):
        for x in range(3, w - 3):
            p = img[y, x]
            ring = [img[y + dy, x + dx] for dx, dy in RING]
            best = None
            for sign in (1, -1):
                flags = [sign * (v - p) > t for v in ring]
                for start in range(16):
                    total = 0.0
                    for length in range(1, 17):
                        k = (start + length - 1) % 16
                        if not flags[k]:
                            break
                        total += abs(ring[k] - p)
                        if length >= n and (best is None or total > best):
                            best = total
            if best is not None:
                out[(x, y)] = best
    return out


def orient(a, b, c):
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return int(v > 0) - int(v < 0)


def _on_segment(a, b, p):
    return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])


def orientation_intersect(p1, p2, q1, q2):
    """Classic signed-area test, exact for integer coordinates."""
    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(p1, p2, q1):
        return True
    if o2 == 0 and _on_segment(p1, p2, q2):
        return True
    if o3 == 0 and _on_segment(q1, q2, p1):
        return True
    if o4 == 0 and _on_segment(q1, q2, p2):
        return True
    return False


def point_segment_distance(p, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    dd = dx * dx + dy * dy
    t = 0.0 if dd == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / dd))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def segment_gap(p1, p2, q1, q2):
    """Segment-to-segment distance from the orientation test plus endpoint distances."""
    if orientation_intersect(p1, p2, q1, q2):
        return 0.0
    return min(point_segment_distance(p1, q1, q2), point_segment_distance(p2, q1, q2),
               point_segment_distance(q1, p1, p2), point_segment_distance(q2, p1, p2))


def floyd_warshall(n, edges):
    """All-pairs shortest path lengths; ``edges`` is [(i, j, w)] undirected."""
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for i, j, w in edges:
        if w < d[i, j]:
            d[i, j] = d[j, i] = w
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def grid_dijkstra(occ, start, goal):
    """8-connected grid Dijkstra, diagonal refused when both side cells are blocked."""
    h, w = occ.shape
    dist = {start: 0.0}
    heap = [(0.0, start)]
    seen = set()
    while heap:
        d, (x, y) = heapq.heappop(heap)
        if (x, y) in seen:
            continue
        seen.add((x, y))
        if (x, y) == goal:
            return d
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                nx, ny = x + dx, y + dy
                if not (0 <= nx < w and 0 <= ny < h) or occ[ny, nx]:
                    continue
                if dx and dy and occ[y, nx] and occ[ny, x]:
                    continue
                nd = d + (math.sqrt(2.0) if dx and dy else 1.0)
                if nd < dist.get((nx, ny), math.inf):
                    dist[(nx, ny)] = nd
                    heapq.heappush(heap, (nd, (nx, ny)))
    return math.inf


def sad_disparity(left, right, window, omega):
    """Direct SAD search at every pixel; -1 where unsupported or ambiguous."""
    L = np.asarray(left, dtype=np.int64)
    R = np.asarray(right, dtype=np.int64)
    h, w = L.shape
    r = window // 2
    out = np.full((h, w), -1, dtype=np.int64)
    for y in range(r, h - r):
        for x in range(omega + r, w - r):
            costs = []
            for d in range(omega + 1):
                a = L[y - r:y + r + 1, x - r:x + r + 1]
                b = R[y - r:y + r + 1, x - d - r:x - d + r + 1]
                costs.append(int(np.abs(a - b).sum()))
            best = min(range(omega + 1), key=lambda k: (costs[k], k))
            others = [costs[k] for k in range(omega + 1) if abs(k - best) > 1]
            if others and costs[best] >= 0.95 * min(others):
                continue
            out[y, x] = best
    return out


def naive_convolve(img, kernel):
    img = np.asarray(img, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    h, w = img.shape
    c = k.shape[0] // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            s = 0.0
            for j in range(k.shape[0]):
                for i in range(k.shape[1]):
                    yy = min(max(y + j - c, 0), h - 1)
                    xx = min(max(x + i - c, 0), w - 1)
                    s += k[j, i] * img[yy, xx]
            out[y, x] = s
    return out


def touched_cells(a, b, w, h):
    """Cells whose closed square meets the closed center-to-center segment a-b.

    Liang-Barsky clipping in exact rationals against every cell of a w x h grid.
    """
    x0, y0 = Fraction(2 * a[0] + 1, 2), Fraction(2 * a[1] + 1, 2)
    x1, y1 = Fraction(2 * b[0] + 1, 2), Fraction(2 * b[1] + 1, 2)
    dx, dy = x1 - x0, y1 - y0
    out = set()
    for cy in range(h):
        for cx in range(w):
            lo, hi = Fraction(0), Fraction(1)
            ok = True
            for p, q in ((-dx, x0 - cx), (dx, cx + 1 - x0), (-dy, y0 - cy), (dy, cy + 1 - y0)):
                if p == 0:
                    if q < 0:
                        ok = False
                        break
                    continue
                t = q / p
                if p < 0:
                    lo = max(lo, t)
                else:
                    hi = min(hi, t)
            if ok and lo <= hi:
                out.add((cx, cy))
    return out
