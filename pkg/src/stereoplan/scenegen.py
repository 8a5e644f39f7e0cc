"""Synthetic top-down terrain scenes rendered as rectified stereo pairs.

The world is a heightfield seen by an orthographic camera at
``camera_height``. A point at elevation ``e`` has depth ``z = H - e`` and
appears shifted by ``d = 2 f l / z`` pixels in the right image.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import StereoPlanError
from .fiducial import MarkerDictionary, default_dictionary
from .stereo import StereoRig

GROUND_LEVEL = 110
BOX_LEVEL = 190
CRATER_LEVEL = 50
HILL_GAIN = 45
MARKER_DARK, MARKER_LIGHT = 20, 235
GOAL_LEVEL = 35
NOISE_AMPLITUDE = 6
DOT_CONTRAST = 60
DOT_SPACING = 55  # mean distance between texture dots, px


class OverlapError(StereoPlanError):
    pass


class SceneFormatError(StereoPlanError):
    pass


class Kind(str, Enum):
    BOX = "box"
    CRATER = "crater"
    HILL = "hill"


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def mask(self, xx, yy):
        return (xx >= self.x0) & (xx < self.x1) & (yy >= self.y0) & (yy < self.y1)

    def polygon(self) -> np.ndarray:
        # pixel-centre outline of the covered block
        x0, y0 = math.ceil(self.x0), math.ceil(self.y0)
        x1, y1 = math.ceil(self.x1) - 1, math.ceil(self.y1) - 1
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)

    def text(self) -> str:
        return f"rect = {self.x0:g} {self.y0:g} {self.x1:g} {self.y1:g}"


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    r: float

    def mask(self, xx, yy):
        return (xx - self.cx) ** 2 + (yy - self.cy) ** 2 <= self.r ** 2

    def polygon(self, n: int = 64) -> np.ndarray:
        a = 2 * np.pi * np.arange(n) / n
        return np.stack([self.cx + self.r * np.cos(a), self.cy + self.r * np.sin(a)], axis=1)

    def text(self) -> str:
        return f"disk = {self.cx:g} {self.cy:g} {self.r:g}"


@dataclass(frozen=True)
class ObstacleSpec:
    kind: Kind
    footprint: Rect | Disk
    height: float
    hidden: bool = False  # same intensity as the ground: visible only in depth

    def __post_init__(self):
        if self.kind in (Kind.BOX, Kind.HILL) and not self.height > 0:
            raise ValueError(f"{self.kind.value} height must be positive")
        if self.kind is Kind.CRATER and not self.height < 0:
            raise ValueError("crater height must be negative")
        if self.kind is Kind.HILL and not isinstance(self.footprint, Disk):
            raise ValueError("hills need a disk footprint")


@dataclass(frozen=True)
class MarkerSpec:
    x: float
    y: float
    yaw: float = 0.0  # degrees
    id: int = 7
    side: int = 60


@dataclass(frozen=True)
class GoalSpec:
    x: float
    y: float
    radius: int = 25


@dataclass(frozen=True)
class SceneSpec:
    name: str
    width: int
    height: int
    marker: MarkerSpec
    goal: GoalSpec
    obstacles: tuple[ObstacleSpec, ...] = ()
    rig: StereoRig = StereoRig(1500.0, 0.05)
    camera_height: float = 10.0
    texture_seed: int = 1
    reflective: bool = False

    def __post_init__(self):
        if self.marker.side < 40:
            raise ValueError("marker side must be >= 40 px")
        if not 10 <= self.goal.radius <= 40:
            raise ValueError("goal radius must be within [10, 40]")


@dataclass
class SceneTruth:
    obstacle_polygons: list[np.ndarray]
    kinds: list[str]
    hidden: list[bool]
    heightfield: np.ndarray
    disparity: np.ndarray  # real-valued forward-model disparity
    occluded: np.ndarray  # left pixels not visible in the right image
    textured: np.ndarray
    start: tuple[float, float]
    goal: tuple[float, float]
    marker_yaw: float = 0.0
    extra: dict = field(default_factory=dict)

    def polygons_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["polygon", "kind", "hidden", "vertex", "x", "y"])
        for i, (poly, kind, hid) in enumerate(zip(self.obstacle_polygons, self.kinds, self.hidden)):
            for j, (x, y) in enumerate(poly):
                wr.writerow([i, kind, int(hid), j, f"{x:g}", f"{y:g}"])
        return buf.getvalue()

    def heightfield_gray(self) -> np.ndarray:
        """Heightfield scaled into 0..255 with ground at mid-gray."""
        span = max(float(np.abs(self.heightfield).max()), 1e-9)
        return np.clip(np.rint(128 + 127 * self.heightfield / span), 0, 255).astype(np.uint8)


def _grid(spec: SceneSpec):
    yy, xx = np.mgrid[0:spec.height, 0:spec.width]
    return xx.astype(np.float64), yy.astype(np.float64)


def obstacle_masks(spec: SceneSpec) -> list[np.ndarray]:
    xx, yy = _grid(spec)
    return [ob.footprint.mask(xx, yy) for ob in spec.obstacles]


def build_heightfield(spec: SceneSpec) -> np.ndarray:
    xx, yy = _grid(spec)
    field_ = np.zeros((spec.height, spec.width))
    masks = obstacle_masks(spec)
    for i in range(len(masks)):
        for j in range(i):
            if (masks[i] & masks[j]).any():
                raise OverlapError(f"obstacles {j} and {i} overlap")
    for ob, m in zip(spec.obstacles, masks):
        if ob.kind is Kind.HILL:
            fp = ob.footprint
            rho = np.hypot(xx - fp.cx, yy - fp.cy)
            bump = 0.5 * ob.height * (1 + np.cos(np.pi * np.minimum(rho / fp.r, 1.0)))
            field_ = np.where(m, bump, field_)
        else:
            field_ = np.where(m, ob.height, field_)
    return field_


def _marker_layer(spec: SceneSpec, dictionary: MarkerDictionary):
    """Marker intensity (nan outside the marker) and its footprint mask."""
    mk = spec.marker
    cells = dictionary.cells(mk.id)
    n = cells.shape[0]
    s = float(mk.side)
    yaw = math.radians(mk.yaw)
    c, sn = math.cos(yaw), math.sin(yaw)
    xx, yy = _grid(spec)
    dx, dy = xx - mk.x, yy - mk.y
    # marker-local coordinates: u along the top edge, v towards the bottom edge
    u = c * dx + sn * dy
    v = -sn * dx + c * dy
    inside = (np.abs(u) < s / 2) & (np.abs(v) < s / 2)
    iu = np.clip(np.floor((u + s / 2) / s * n).astype(int), 0, n - 1)
    iv = np.clip(np.floor((v + s / 2) / s * n).astype(int), 0, n - 1)
    val = np.where(cells[iv, iu] == 1, MARKER_LIGHT, MARKER_DARK).astype(np.float64)
    return np.where(inside, val, np.nan), inside


def render_left(spec: SceneSpec, heightfield: np.ndarray | None = None,
                dictionary: MarkerDictionary | None = None):
    """Left (reference) intensity image plus the textured-pixel mask."""
    dictionary = dictionary or default_dictionary()
    hf = build_heightfield(spec) if heightfield is None else heightfield
    rng = np.random.default_rng(spec.texture_seed)
    xx, yy = _grid(spec)
    base = np.full(hf.shape, float(GROUND_LEVEL))
    for ob, m in zip(spec.obstacles, obstacle_masks(spec)):
        if ob.hidden:
            continue
        if ob.kind is Kind.BOX:
            base[m] = BOX_LEVEL
        elif ob.kind is Kind.CRATER:
            base[m] = CRATER_LEVEL
        else:
            base[m] = GROUND_LEVEL + HILL_GAIN * hf[m] / ob.height
    marker, in_marker = _marker_layer(spec, dictionary)
    g = spec.goal
    in_goal = (xx - g.x) ** 2 + (yy - g.y) ** 2 <= g.radius ** 2
    base = np.where(in_marker, marker, base)
    base[in_goal] = GOAL_LEVEL

    noise = rng.integers(-NOISE_AMPLITUDE, NOISE_AMPLITUDE + 1, size=hf.shape).astype(np.float64)
    n_dots = int(spec.width * spec.height / DOT_SPACING ** 2)
    dx = rng.integers(3, spec.width - 3, size=n_dots)
    dy = rng.integers(3, spec.height - 3, size=n_dots)
    dots = np.zeros(hf.shape)
    dots[dy, dx] = DOT_CONTRAST
    keepout = in_marker | in_goal
    dots[keepout] = 0.0

    textured = np.ones(hf.shape, dtype=bool)
    if spec.reflective:
        prng = np.random.default_rng(spec.texture_seed + 1)
        side = max(20, min(spec.width, spec.height) // 8)
        for _ in range(4):
            px = int(prng.integers(0, spec.width - side))
            py = int(prng.integers(0, spec.height - side))
            textured[py:py + side, px:px + side] = False
    tex = np.where(textured, noise + dots, 0.0)
    img = np.clip(base + tex, 0, 255)
    return img.astype(np.uint8), textured, in_marker, in_goal


def forward_disparity(spec: SceneSpec, heightfield: np.ndarray) -> np.ndarray:
    depth = spec.camera_height - heightfield
    if (depth <= 0).any():
        raise ValueError("terrain reaches the camera")
    return 2.0 * spec.rig.focal * spec.rig.half_baseline / depth


def render_stereo(spec: SceneSpec, dictionary: MarkerDictionary | None = None):
    """Render ``(left, right, truth)`` for a scene.

    The right image takes every left pixel shifted left by its rounded
    forward-model disparity; where several land on one pixel the nearest
    surface (largest disparity) wins. Uncovered right pixels get fresh
    texture standing in for surfaces unseen from the left camera.
    """
    hf = build_heightfield(spec)
    left, textured, in_marker, in_goal = render_left(spec, hf, dictionary)
    disp = forward_disparity(spec, hf)
    di = np.floor(disp + 0.5).astype(np.int64)
    h, w = left.shape
    ys, xs = np.mgrid[0:h, 0:w]
    xr = xs - di
    inview = xr >= 0
    ys_f, xs_f, xr_f, d_f = ys[inview], xs[inview], xr[inview], di[inview]
    order = np.lexsort((d_f, xr_f, ys_f))
    ys_f, xs_f, xr_f, d_f = ys_f[order], xs_f[order], xr_f[order], d_f[order]
    key = ys_f * w + xr_f
    last = np.ones(len(key), dtype=bool)
    last[:-1] = key[1:] != key[:-1]
    rng = np.random.default_rng(spec.texture_seed + 7919)
    right = (GROUND_LEVEL + rng.integers(-NOISE_AMPLITUDE, NOISE_AMPLITUDE + 1, size=(h, w))).astype(np.uint8)
    right[ys_f[last], xr_f[last]] = left[ys_f[last], xs_f[last]]
    occluded = np.ones((h, w), dtype=bool)
    occluded[ys_f[last], xs_f[last]] = False

    polys = [ob.footprint.polygon() for ob in spec.obstacles]
    truth = SceneTruth(
        obstacle_polygons=polys,
        kinds=[ob.kind.value for ob in spec.obstacles],
        hidden=[ob.hidden for ob in spec.obstacles],
        heightfield=hf,
        disparity=disp,
        occluded=occluded,
        textured=textured,
        start=(float(spec.marker.x), float(spec.marker.y)),
        goal=(float(spec.goal.x), float(spec.goal.y)),
        marker_yaw=math.radians(spec.marker.yaw),
        extra={"in_marker": in_marker, "in_goal": in_goal},
    )
    return left, right, truth


# --- presets -----------------------------------------------------------------

def _box(x0, y0, x1, y1, h=5.0):
    return ObstacleSpec(Kind.BOX, Rect(x0, y0, x1, y1), h)


def _crater(x0, y0, x1, y1, h=-5.0, hidden=False):
    return ObstacleSpec(Kind.CRATER, Rect(x0, y0, x1, y1), h, hidden)


def _hill(cx, cy, r, h=3.0):
    return ObstacleSpec(Kind.HILL, Disk(cx, cy, r), h)


def preset_scenes() -> list[SceneSpec]:
    """Five desk-scale analogues of the V-REP and lab scenes."""
    scene1 = SceneSpec(
        "scene1", 759, 763,
        marker=MarkerSpec(120, 380, 0.0, 7, 60),
        goal=GoalSpec(660, 390, 25),
        obstacles=(
            _box(300, 120, 360, 640, 6.25),
            _box(470, 60, 530, 330, 5.0),
            _box(470, 450, 530, 720, 5.0),
            _crater(200, 560, 280, 660),
            _hill(620, 620, 60),
        ),
        texture_seed=11,
    )
    scene2 = SceneSpec(
        "scene2", 808, 814,
        marker=MarkerSpec(110, 110, 30.0, 3, 60),
        goal=GoalSpec(700, 700, 25),
        obstacles=(
            _box(180, 260, 620, 320, 5.0),
            _box(560, 320, 620, 640, 6.25),
            _crater(260, 420, 420, 560),
            _hill(690, 300, 70),
            _box(140, 600, 260, 700, 4.0),
        ),
        texture_seed=22,
    )
    scene3 = SceneSpec(
        "scene3", 808, 814,
        marker=MarkerSpec(110, 400, -20.0, 5, 60),
        goal=GoalSpec(700, 400, 25),
        obstacles=(
            # two tall blocks with a corridor narrower than the vehicle
            _box(330, 150, 430, 385, 6.25),
            _box(330, 401, 430, 640, 6.25),
            _crater(520, 250, 620, 330),
            _box(540, 520, 640, 600, 5.0),
            _hill(200, 680, 60),
        ),
        texture_seed=33,
    )
    scene4 = SceneSpec(
        "scene4", 1500, 1500,
        marker=MarkerSpec(200, 750, 90.0, 9, 70),
        goal=GoalSpec(1300, 760, 30),
        obstacles=(
            _box(450, 250, 530, 1250, 6.25),
            _box(820, 100, 900, 700, 5.0),
            _box(820, 830, 900, 1400, 5.0),
            _crater(1050, 600, 1200, 720),
            _crater(1000, 1000, 1150, 1150),
            _hill(650, 1380, 80),
            _hill(1150, 300, 90),
        ),
        texture_seed=44,
    )
    scene5 = SceneSpec(
        "hidden_crater", 808, 814,
        marker=MarkerSpec(110, 600, 0.0, 2, 60),
        goal=GoalSpec(700, 420, 25),
        obstacles=(
            # wall open only at the top; every grid-optimal route then
            # crosses the crater, which has the ground's intensity
            _box(240, 200, 300, 814, 5.0),
            _crater(420, 220, 600, 420, hidden=True),
        ),
        texture_seed=55,
    )
    return [scene1, scene2, scene3, scene4, scene5]


def preset(name: str) -> SceneSpec:
    for sc in preset_scenes():
        if sc.name == name:
            return sc
    raise KeyError(f"unknown preset {name!r}; have {[s.name for s in preset_scenes()]}")


# --- key-value file format ---------------------------------------------------

def parse_kv(text: str) -> tuple[dict[str, str], list[tuple[str, dict[str, str]]]]:
    """Split ``key = value`` text into top-level pairs and ``[section]`` blocks."""
    top: dict[str, str] = {}
    blocks: list[tuple[str, dict[str, str]]] = []
    cur = top
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            blocks.append((line[1:-1].strip().lower(), {}))
            cur = blocks[-1][1]
            continue
        if "=" not in line:
            raise SceneFormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        k, v = line.split("=", 1)
        cur[k.strip().lower()] = v.strip()
    return top, blocks


def _floats(s: str, n: int, what: str) -> list[float]:
    parts = s.split()
    if len(parts) != n:
        raise SceneFormatError(f"{what}: expected {n} numbers, got {s!r}")
    return [float(p) for p in parts]


def _bool(s: str) -> bool:
    return s.strip().lower() in ("1", "true", "yes", "on")


def loads_scene(text: str) -> SceneSpec:
    top, blocks = parse_kv(text)
    try:
        obstacles = []
        for kind, kv in blocks:
            if kind not in ("box", "crater", "hill"):
                raise SceneFormatError(f"unknown block [{kind}]")
            if "rect" in kv:
                fp = Rect(*_floats(kv["rect"], 4, "rect"))
            elif "disk" in kv:
                fp = Disk(*_floats(kv["disk"], 3, "disk"))
            else:
                raise SceneFormatError(f"[{kind}] needs rect or disk")
            obstacles.append(ObstacleSpec(Kind(kind), fp, float(kv["height"]), _bool(kv.get("hidden", "0"))))
        return SceneSpec(
            name=top.get("name", "scene"),
            width=int(top["width"]),
            height=int(top["height"]),
            marker=MarkerSpec(float(top["marker_x"]), float(top["marker_y"]),
                              float(top.get("marker_yaw", 0)), int(top.get("marker_id", 7)),
                              int(top.get("marker_side", 60))),
            goal=GoalSpec(float(top["goal_x"]), float(top["goal_y"]), int(top.get("goal_radius", 25))),
            obstacles=tuple(obstacles),
            rig=StereoRig(float(top.get("focal", 1500)), float(top.get("half_baseline", 0.05))),
            camera_height=float(top.get("camera_height", 10)),
            texture_seed=int(top.get("texture_seed", 1)),
            reflective=_bool(top.get("reflective", "0")),
        )
    except KeyError as exc:
        raise SceneFormatError(f"missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise SceneFormatError(str(exc)) from None


def dumps_scene(spec: SceneSpec) -> str:
    m, g = spec.marker, spec.goal
    lines = [
        f"name = {spec.name}",
        f"width = {spec.width}",
        f"height = {spec.height}",
        f"texture_seed = {spec.texture_seed}",
        f"focal = {spec.rig.focal:g}",
        f"half_baseline = {spec.rig.half_baseline:g}",
        f"camera_height = {spec.camera_height:g}",
        f"reflective = {int(spec.reflective)}",
        f"marker_x = {m.x:g}",
        f"marker_y = {m.y:g}",
        f"marker_yaw = {m.yaw:g}",
        f"marker_id = {m.id}",
        f"marker_side = {m.side}",
        f"goal_x = {g.x:g}",
        f"goal_y = {g.y:g}",
        f"goal_radius = {g.radius}",
    ]
    for ob in spec.obstacles:
        lines += ["", f"[{ob.kind.value}]", ob.footprint.text(), f"height = {ob.height:g}"]
        if ob.hidden:
            lines.append("hidden = 1")
    return "\n".join(lines) + "\n"


def load_scene(path: str | Path) -> SceneSpec:
    return loads_scene(Path(path).read_text())


def with_marker(spec: SceneSpec, **kw) -> SceneSpec:
    return replace(spec, marker=replace(spec.marker, **kw))
