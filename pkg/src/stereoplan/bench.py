"""Timing harness: proposed planner vs A* vs PRM on the preset scenes."""

from __future__ import annotations

import csv
import io
import math
import os
import platform
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .baselines import PrmConfig, astar, prm, rasterize
from .errors import StereoPlanError
from .planner import PipelineConfig, PlanningScene, VehicleSpec, assemble_scene, build_graph, shortest_path
from .scenegen import preset, render_stereo

ALGORITHMS = ("proposed", "prm", "astar")


@dataclass
class BenchRow:
    scene: str
    algorithm: str
    elapsed: float
    length: float
    success: bool
    parallel: bool = False


@dataclass
class BenchReport:
    rows: list[BenchRow]
    repetitions: int
    environment: str = field(default_factory=lambda: (
        f"python {platform.python_version()} on {platform.machine()}, {os.cpu_count()} cpu"))

    def summary(self) -> list[dict]:
        """One record per (scene, algorithm), in first-seen order."""
        groups: dict[tuple[str, str], list[BenchRow]] = {}
        for r in self.rows:
            groups.setdefault((r.scene, r.algorithm), []).append(r)
        out = []
        for (scene, alg), rs in groups.items():
            ok = [r for r in rs if r.success]
            times = [r.elapsed for r in ok]
            out.append({
                "scene": scene,
                "algorithm": alg,
                "median_s": statistics.median(times) if times else math.nan,
                "min_s": min(times) if times else math.nan,
                "max_s": max(times) if times else math.nan,
                "length_px": ok[0].length if ok else math.nan,
                "success": len(ok) == len(rs),
                "parallel": any(r.parallel for r in rs),
            })
        return out

    def median(self, scene: str, algorithm: str) -> float:
        for rec in self.summary():
            if rec["scene"] == scene and rec["algorithm"] == algorithm:
                return rec["median_s"]
        raise KeyError((scene, algorithm))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["scene", "algorithm", "median_s", "min_s", "max_s", "length_px", "success", "parallel"])
        for r in self.summary():
            wr.writerow([r["scene"], r["algorithm"], f"{r['median_s']:.6f}", f"{r['min_s']:.6f}",
                         f"{r['max_s']:.6f}", f"{r['length_px']:.3f}", str(r["success"]).lower(),
                         str(r["parallel"]).lower()])
        return buf.getvalue()


@dataclass(frozen=True)
class BenchSettings:
    vehicle: VehicleSpec = VehicleSpec()
    pipeline: PipelineConfig = PipelineConfig()
    prm: PrmConfig = PrmConfig()
    cell_size: int = 1
    inflation: int | None = None


def prepare(scene_name: str, settings: BenchSettings) -> PlanningScene:
    """Vision front end for a preset; not part of any planner's timing."""
    left, right, _ = render_stereo(preset(scene_name))
    return assemble_scene(left, right, settings.vehicle, settings.pipeline)


def run_algorithm(scene: PlanningScene, algorithm: str, settings: BenchSettings, grid=None):
    if algorithm == "proposed":
        return shortest_path(build_graph(scene, settings.pipeline.tol, settings.pipeline.candidate_cap))
    if grid is None:
        grid = rasterize(scene, settings.cell_size, settings.inflation)
    s = grid.cell_of(scene.start.x, scene.start.y)
    g = grid.cell_of(scene.goal.x, scene.goal.y)
    if algorithm == "astar":
        return astar(grid, s, g)
    if algorithm == "prm":
        return prm(grid, settings.prm, s, g)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _cell(scene_name: str, algorithms: tuple[str, ...], repetitions: int, settings: BenchSettings,
          parallel: bool) -> list[BenchRow]:
    rows = []
    try:
        scene = prepare(scene_name, settings)
    except StereoPlanError:
        return [BenchRow(scene_name, a, math.nan, math.nan, False, parallel)
                for a in algorithms for _ in range(repetitions)]
    grid = None
    if any(a != "proposed" for a in algorithms):
        try:
            grid = rasterize(scene, settings.cell_size, settings.inflation)
        except StereoPlanError:
            grid = None
    # interleaved so slow drift in machine load hits every algorithm alike
    for _ in range(repetitions):
        for alg in algorithms:
            try:
                if alg != "proposed" and grid is None:
                    raise StereoPlanError("no occupancy grid")
                res = run_algorithm(scene, alg, settings, grid)
                rows.append(BenchRow(scene_name, alg, res.elapsed, res.length, True, parallel))
            except StereoPlanError:
                rows.append(BenchRow(scene_name, alg, math.nan, math.nan, False, parallel))
    return rows


def run_bench(scenes, algorithms=ALGORITHMS, repetitions: int = 5,
              settings: BenchSettings = BenchSettings(), parallel: bool = False) -> BenchReport:
    """Time every (scene, algorithm) ``repetitions`` times.

    Repetitions are interleaved across algorithms on the same prepared
    scene. With ``parallel`` the scenes run in separate processes
    and every row is flagged, since contended timings are not comparable.
    """
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    scenes = list(scenes)
    algorithms = tuple(algorithms)
    if parallel:
        with ProcessPoolExecutor() as ex:
            parts = list(ex.map(_cell, scenes, [algorithms] * len(scenes), [repetitions] * len(scenes),
                                [settings] * len(scenes), [True] * len(scenes)))
    else:
        parts = [_cell(s, algorithms, repetitions, settings, False) for s in scenes]
    return BenchReport([r for p in parts for r in p], repetitions)
