"""FAST corners, corner suppression and depth-based waypoint filtering."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .edges import ImageTooSmall, gaussian_blur, sobel
from .errors import StereoPlanError


class StartGoalDisparityMismatch(StereoPlanError):
    pass


class Source(str, Enum):
    TERRAIN = "terrain"
    DISPARITY = "disparity"


# Radius-3 Bresenham ring, numbered clockwise from the top pixel (y grows down).
CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)


@dataclass(frozen=True)
class Corner:
    x: int
    y: int
    score: float
    source: Source = Source.TERRAIN


@dataclass(frozen=True)
class FeaturePoint:
    """One row of the feature matrix: position plus the sampled raster value."""

    x: int
    y: int
    value: float
    source: str = ""

    @property
    def xy(self) -> tuple[int, int]:
        return (self.x, self.y)


def _ring_stack(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    return np.stack([img[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx] for dx, dy in CIRCLE])


def _best_arc(flags: np.ndarray, diffs: np.ndarray, n: int) -> np.ndarray:
    """Largest |diff| sum over circular runs of ``flags`` with length >= n (0 if none)."""
    full = flags.all(axis=0)
    flags2 = np.concatenate([flags, flags])
    diffs2 = np.concatenate([diffs, diffs])
    run = np.zeros(flags.shape[1:], dtype=np.int32)
    acc = np.zeros(flags.shape[1:], dtype=np.float64)
    best = np.zeros(flags.shape[1:], dtype=np.float64)
    for k in range(32):
        f = flags2[k]
        run = np.where(f, run + 1, 0)
        acc = np.where(f, acc + diffs2[k], 0.0)
        best = np.where(run >= n, np.maximum(best, acc), best)
    total = np.where(flags, diffs, 0.0).sum(axis=0)
    return np.where(full, total, best)


def fast_detect(image: np.ndarray, t: float = 20, n: int = 12,
                source: Source = Source.TERRAIN) -> list[Corner]:
    """Segment-test corners on the 16-pixel ring.

    A pixel is a corner when at least ``n`` contiguous ring pixels (with
    wrap-around) are all brighter than ``I(p) + t`` or all darker than
    ``I(p) - t``. The score is the absolute-contrast sum over the best
    qualifying maximal arc.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not 9 <= n <= 16:
        raise ValueError("n must be in [9, 16]")
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    if h < 7 or w < 7:
        raise ImageTooSmall(f"FAST needs at least 7x7, got {w}x{h}")
    center = img[3:h - 3, 3:w - 3]
    ring = _ring_stack(img)
    diff = np.abs(ring - center)
    bright = ring > center + t
    dark = ring < center - t
    # high-speed rejection: an arc of n >= 9 covers at least 2 of the 4 compass pixels
    compass = [0, 4, 8, 12]
    possible = (bright[compass].sum(axis=0) >= 2) | (dark[compass].sum(axis=0) >= 2)
    score = np.zeros(center.shape)
    if possible.any():
        ys, xs = np.nonzero(possible)
        sb = _best_arc(bright[:, ys, xs], diff[:, ys, xs], n)
        sd = _best_arc(dark[:, ys, xs], diff[:, ys, xs], n)
        score[ys, xs] = np.maximum(sb, sd)
    ys, xs = np.nonzero(score > 0)
    return [Corner(int(x) + 3, int(y) + 3, float(score[y, x]), source) for y, x in zip(ys, xs)]


def nms_corners(corners: list[Corner], radius: int) -> list[Corner]:
    """Greedy suppression: strongest first, drop anything within Chebyshev ``radius``."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    order = sorted(corners, key=lambda c: (-c.score, c.y, c.x))
    kept: list[Corner] = []
    taken: dict[tuple[int, int], list[Corner]] = {}
    cell = radius + 1
    for c in order:
        cx, cy = c.x // cell, c.y // cell
        clash = False
        for gx in (cx - 1, cx, cx + 1):
            for gy in (cy - 1, cy, cy + 1):
                for k in taken.get((gx, gy), ()):
                    if max(abs(k.x - c.x), abs(k.y - c.y)) <= radius:
                        clash = True
                        break
                if clash:
                    break
            if clash:
                break
        if not clash:
            kept.append(c)
            taken.setdefault((cx, cy), []).append(c)
    return kept


def merge_corner_sets(*sets: list[Corner], radius: int = 2) -> list[Corner]:
    """Union of corner lists; near-duplicates collapse to the higher score."""
    union = [c for s in sets for c in s]
    return nms_corners(union, radius)


def filter_candidates(corners: list[Corner], disparity, start: FeaturePoint,
                      goal: FeaturePoint, tol: float = 3.0) -> list[FeaturePoint]:
    """Keep corners whose disparity matches the start/goal ground level.

    ``disparity`` is a :class:`~stereoplan.stereo.DisparityMap`. The
    reference level is the mean of the start and goal values.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if abs(start.value - goal.value) > 2 * tol:
        raise StartGoalDisparityMismatch(
            f"start disparity {start.value} and goal disparity {goal.value} differ by more than 2*tol")
    ref = 0.5 * (start.value + goal.value)
    d = disparity.d
    out = []
    for c in corners:
        v = d[c.y, c.x]
        if v < 0:
            continue
        if abs(float(v) - ref) <= tol:
            out.append(FeaturePoint(c.x, c.y, float(v), Source(c.source).value))
    return out


def corner_response(image: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Diagnostic corner strength det(H) / trace(H) of the gradient matrix H.

    Not used for candidate selection.
    """
    g = sobel(np.asarray(image, dtype=np.float64))
    hxx = gaussian_blur(g.gx * g.gx, sigma)
    hyy = gaussian_blur(g.gy * g.gy, sigma)
    hxy = gaussian_blur(g.gx * g.gy, sigma)
    det = hxx * hyy - hxy * hxy
    tr = hxx + hyy
    out = np.zeros_like(tr)
    np.divide(det, tr, out=out, where=tr > 1e-12)
    return out


def candidates_to_csv(points: list[FeaturePoint]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["x", "y", "value", "source"])
    for p in points:
        wr.writerow([p.x, p.y, f"{p.value:g}", p.source])
    return buf.getvalue()
