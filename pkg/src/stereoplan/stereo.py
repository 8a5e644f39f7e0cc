"""SAD block matching and the disparity/depth relation z = 2 f l / d."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import StereoPlanError

INVALID = -1
UNIQUENESS_RATIO = 0.95
_BIG = np.int64(1) << 40


class DimensionMismatch(StereoPlanError):
    pass


class BadWindow(StereoPlanError):
    pass


class ZeroDisparity(StereoPlanError):
    pass


@dataclass(frozen=True)
class StereoRig:
    focal: float
    half_baseline: float

    def __post_init__(self):
        if not (self.focal > 0 and self.half_baseline > 0):
            raise ValueError("focal and half_baseline must be positive")

    @property
    def baseline(self) -> float:
        return 2.0 * self.half_baseline

    def disparity_at(self, depth: float) -> float:
        return 2.0 * self.focal * self.half_baseline / depth


@dataclass(frozen=True)
class DisparityMap:
    d: np.ndarray  # int16, INVALID where no reliable match
    omega: int
    window: int

    @property
    def width(self) -> int:
        return self.d.shape[1]

    @property
    def height(self) -> int:
        return self.d.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return self.d != INVALID

    def invalid_fraction(self) -> float:
        return float((~self.valid).mean())

    def filled(self) -> np.ndarray:
        """Float raster with invalid pixels replaced by the nearest valid value."""
        d = self.d.astype(np.float64)
        bad = ~self.valid
        if not bad.any():
            return d
        if bad.all():
            return np.zeros_like(d)
        _, (iy, ix) = ndimage.distance_transform_edt(bad, return_indices=True)
        return d[iy, ix]

    def sample(self, x: int, y: int, radius: int = 2) -> float | None:
        """Median valid disparity in a small square around (x, y)."""
        y0, y1 = max(0, y - radius), min(self.height, y + radius + 1)
        x0, x1 = max(0, x - radius), min(self.width, x + radius + 1)
        patch = self.d[y0:y1, x0:x1]
        vals = patch[patch != INVALID]
        if vals.size == 0:
            return None
        return float(np.median(vals))

    def to_gray(self) -> np.ndarray:
        g = np.rint(np.clip(self.d, 0, self.omega) / self.omega * 255.0)
        return np.where(self.valid, g, 0).astype(np.uint8)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y", "d"])
        ys, xs = np.nonzero(self.valid)
        for x, y in zip(xs, ys):
            wr.writerow([int(x), int(y), int(self.d[y, x])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, width: int, height: int, omega: int, window: int) -> "DisparityMap":
        d = np.full((height, width), INVALID, dtype=np.int16)
        rows = csv.DictReader(io.StringIO(text))
        for r in rows:
            d[int(r["y"]), int(r["x"])] = int(r["d"])
        return cls(d, omega, window)


def odd_window(window: int) -> int:
    """Round an even block size up to the next odd value."""
    return window + 1 if window % 2 == 0 else window


def _box_sum(a: np.ndarray, w: int) -> np.ndarray:
    """Sums over every full w x w window; output is (H - w + 1, W - w + 1)."""
    s = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=s[1:, 1:])
    return s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]


def block_match(left: np.ndarray, right: np.ndarray, window: int = 10, omega: int = 50,
                strip: int = 96) -> DisparityMap:
    """Left-referenced SAD block matching over disparities 0..omega.

    Ties go to the smaller disparity. Pixels without full window support
    for every searched disparity (the left ``omega + w // 2`` columns), or
    whose best cost is not clearly better than the best cost at least two
    disparities away (ratio 0.95), are marked INVALID.
    """
    L = np.asarray(left)
    R = np.asarray(right)
    if L.shape != R.shape:
        raise DimensionMismatch(f"left {L.shape} vs right {R.shape}")
    if L.ndim != 2:
        raise DimensionMismatch("block matching needs gray images")
    w = odd_window(int(window))
    if w < 3:
        raise BadWindow(f"window must be >= 3, got {window}")
    if omega < 1:
        raise ValueError("omega must be >= 1")
    L = L.astype(np.int32)
    R = R.astype(np.int32)
    H, W = L.shape
    half = w // 2
    out = np.full((H, W), INVALID, dtype=np.int16)
    if H < w or W < w:
        return DisparityMap(out, int(omega), w)
    xs = np.arange(half, W - half)
    deltas = np.arange(omega + 1)
    for y0 in range(half, H - half, strip):
        y1 = min(y0 + strip, H - half)
        lrows = L[y0 - half:y1 + half]
        rrows = R[y0 - half:y1 + half]
        cost = np.empty((omega + 1, y1 - y0, W - 2 * half), dtype=np.int64)
        for dlt in deltas:
            diff = np.zeros_like(lrows)
            if dlt < W:
                diff[:, dlt:] = np.abs(lrows[:, dlt:] - rrows[:, :W - dlt])
            c = _box_sum(diff, w)
            cost[dlt] = c
        best = np.argmin(cost, axis=0)
        best_cost = np.take_along_axis(cost, best[None], axis=0)[0]
        near = np.abs(deltas[:, None, None] - best[None]) <= 1
        second = np.where(near, _BIG, cost).min(axis=0)
        ambiguous = (second < _BIG) & (best_cost >= UNIQUENESS_RATIO * second)
        res = np.where(ambiguous, INVALID, best).astype(np.int16)
        res[:, xs - omega - half < 0] = INVALID
        out[y0:y1, half:W - half] = res
    return DisparityMap(out, int(omega), w)


def depth_from_disparity(d: float, rig: StereoRig) -> float:
    if not d > 0:
        raise ZeroDisparity(f"disparity {d} has no finite depth")
    return 2.0 * rig.focal * rig.half_baseline / d


_ANCHORS = np.array([
    [0, 0, 143], [0, 0, 255], [0, 255, 255], [255, 255, 0], [255, 0, 0], [128, 0, 0],
], dtype=np.float64)


def colormap(t: np.ndarray) -> np.ndarray:
    """Piecewise-linear blue->red map for t in [0, 1]."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    pos = t * (len(_ANCHORS) - 1)
    i = np.minimum(pos.astype(int), len(_ANCHORS) - 2)
    f = (pos - i)[..., None]
    return _ANCHORS[i] * (1 - f) + _ANCHORS[i + 1] * f


def disparity_to_color(dmap: DisparityMap) -> np.ndarray:
    rgb = colormap(np.clip(dmap.d, 0, dmap.omega) / dmap.omega)
    rgb[~dmap.valid] = 0
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
