"""Stereo path planning from the command line: disparity, detection, planning, scenes and benchmarks.

Exit codes: 0 success, 2 input or contract error, 3 no path found.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .baselines import PrmConfig, astar, prm, rasterize
from .edges import canny
from .errors import NoPath, StereoPlanError
from .features import FeaturePoint, Source, candidates_to_csv, fast_detect, nms_corners
from .fiducial import detect_goal_circle, detect_marker
from .hough import HoughLineConfig, hough_segments, segments_to_csv
from .imgcore import load_pnm, save_pnm, to_gray
from .planner import (PipelineConfig, VehicleSpec, assemble_scene, build_graph, render_overlay,
                      shortest_path)
from .scenegen import SceneFormatError, dumps_scene, load_scene, parse_kv, preset, preset_scenes, render_stereo
from .stereo import block_match, disparity_to_color

EXIT_OK, EXIT_INPUT, EXIT_NOPATH = 0, 2, 3


class UsageError(Exception):
    pass


def _gray(path) -> np.ndarray:
    img = load_pnm(path)
    return to_gray(img) if img.ndim == 3 else img


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _prefix(p: str) -> Path:
    out = Path(p)
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _with_suffix(prefix: Path, tail: str) -> Path:
    return prefix.with_name(prefix.name + tail)


# --- settings: config file, then flags --------------------------------------

SETTING_KEYS = {
    "omega", "window", "tol", "candidate_cap", "vehicle_length", "vehicle_width",
    "cell_size", "inflation", "prm_samples", "prm_k", "seed",
}


def load_settings(args) -> dict:
    """Merge a key-value config file with command-line flags; flags win."""
    vals: dict = {}
    if getattr(args, "config", None):
        try:
            top, _ = parse_kv(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        vals.update(top)
    for k in SETTING_KEYS | {f.name for f in PipelineConfig.__dataclass_fields__.values()}:
        v = getattr(args, k, None)
        if v is not None:
            vals[k] = v
    return vals


def _settings(vals: dict) -> bench_mod.BenchSettings:
    try:
        vehicle = VehicleSpec(float(vals.get("vehicle_length", 40)), float(vals.get("vehicle_width", 24)))
        cfg = PipelineConfig.from_mapping(vals)
        pc = PrmConfig(int(vals.get("prm_samples", 500)), int(vals.get("prm_k", 10)), int(vals.get("seed", 42)))
        infl = vals.get("inflation")
        return bench_mod.BenchSettings(vehicle, cfg, pc, int(vals.get("cell_size", 1)),
                                       None if infl is None else int(infl))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _add_pipeline_flags(p):
    p.add_argument("--config", help="key = value settings file (flags override it)")
    p.add_argument("--omega", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--candidate-cap", dest="candidate_cap", type=int)
    p.add_argument("--vehicle-length", dest="vehicle_length", type=float)
    p.add_argument("--vehicle-width", dest="vehicle_width", type=float)
    p.add_argument("--cell-size", dest="cell_size", type=int)
    p.add_argument("--inflation", type=int)
    p.add_argument("--prm-samples", dest="prm_samples", type=int)
    p.add_argument("--prm-k", dest="prm_k", type=int)
    p.add_argument("--seed", type=int)


# --- commands ----------------------------------------------------------------

def cmd_disparity(args) -> int:
    left, right = _gray(args.left), _gray(args.right)
    dmap = block_match(left, right, args.window, args.omega)
    out = _prefix(args.out)
    save_pnm(dmap.to_gray(), _with_suffix(out, ".pgm"))
    save_pnm(disparity_to_color(dmap), _with_suffix(out, "_color.ppm"))
    _write(_with_suffix(out, ".csv"), dmap.to_csv())
    print(f"disparity {dmap.width}x{dmap.height} omega={dmap.omega} window={dmap.window} "
          f"invalid={dmap.invalid_fraction():.3f}")
    return EXIT_OK


def cmd_detect(args) -> int:
    img = _gray(args.image)
    out = _prefix(args.out)
    pose = detect_marker(img)
    circ = detect_goal_circle(img)
    _write(_with_suffix(out, "_marker.csv"), "id,cx,cy,yaw_deg\n" + pose.line() + "\n")
    _write(_with_suffix(out, "_goal.csv"), f"a,b,r,score\n{circ.center[0]},{circ.center[1]},{circ.radius},"
                                         f"{circ.score:.4f}\n")
    corners = nms_corners(fast_detect(img, args.fast_t, args.fast_n, Source.TERRAIN), 3)
    pts = [FeaturePoint(c.x, c.y, c.score, c.source.value) for c in corners]
    _write(_with_suffix(out, "_corners.csv"), candidates_to_csv(pts))
    segs = hough_segments(canny(img, 1.4, 0.1, 0.3, relative=True), HoughLineConfig())
    _write(_with_suffix(out, "_lines.csv"), segments_to_csv(segs))
    print(f"marker {pose.line()}")
    print(f"goal {circ.center[0]},{circ.center[1]} r={circ.radius}")
    print(f"corners {len(corners)} lines {len(segs)}")
    return EXIT_OK


def _scene_inputs(args):
    if args.preset:
        left, right, _ = render_stereo(preset(args.preset))
        return left, right
    if args.scene:
        left, right, _ = render_stereo(load_scene(args.scene))
        return left, right
    if args.left and args.right:
        return _gray(args.left), _gray(args.right)
    raise UsageError("give --preset, --scene, or --left and --right")


def cmd_plan(args) -> int:
    st = _settings(load_settings(args))
    left, right = _scene_inputs(args)
    scene = assemble_scene(left, right, st.vehicle, st.pipeline)
    out = _prefix(args.out)
    cands = None
    if args.algorithm == "proposed":
        graph = build_graph(scene, st.pipeline.tol, st.pipeline.candidate_cap)
        cands = graph.candidates
        res = shortest_path(graph)
    else:
        grid = rasterize(scene, st.cell_size, st.inflation)
        save_pnm(grid.to_gray(), _with_suffix(out, "_grid.pgm"))
        s = grid.cell_of(scene.start.x, scene.start.y)
        g = grid.cell_of(scene.goal.x, scene.goal.y)
        res = astar(grid, s, g) if args.algorithm == "astar" else prm(grid, st.prm, s, g)
    _write(_with_suffix(out, "_waypoints.csv"), res.to_csv())
    _write(_with_suffix(out, "_summary.txt"), res.summary() + "\n")
    save_pnm(render_overlay(scene, res, cands), _with_suffix(out, "_overlay.ppm"))
    print(res.summary())
    return EXIT_OK


def cmd_scenegen(args) -> int:
    spec = preset(args.preset) if args.preset else load_scene(args.scene) if args.scene else None
    if spec is None:
        raise UsageError("give --preset or --scene")
    left, right, truth = render_stereo(spec)
    out = _prefix(args.out)
    save_pnm(left, _with_suffix(out, "_left.pgm"))
    save_pnm(right, _with_suffix(out, "_right.pgm"))
    save_pnm(truth.heightfield_gray(), _with_suffix(out, "_height.pgm"))
    _write(_with_suffix(out, "_polygons.csv"), truth.polygons_csv())
    _write(_with_suffix(out, "_scene.txt"), dumps_scene(spec))
    print(f"{spec.name} {spec.width}x{spec.height} obstacles={len(spec.obstacles)}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.repetitions < 3:
        raise UsageError("--repetitions must be at least 3")
    st = _settings(load_settings(args))
    scenes = args.presets or [s.name for s in preset_scenes()]
    for s in scenes:
        preset(s)
    report = bench_mod.run_bench(scenes, args.algorithms, args.repetitions, st, args.parallel)
    _write(Path(args.out), report.to_csv())
    sys.stdout.write(report.to_csv())
    print(f"# {report.environment}, repetitions={report.repetitions}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stereoplan", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("disparity", help="SAD block-matching disparity map")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--omega", type=int, default=50)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_disparity)

    p = sub.add_parser("detect", help="marker, goal circle, corners and lines of one image")
    p.add_argument("image")
    p.add_argument("--fast-t", dest="fast_t", type=float, default=20.0)
    p.add_argument("--fast-n", dest="fast_n", type=int, default=12)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("plan", help="plan a path on a stereo pair")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset")
    src.add_argument("--scene", help="scene description file")
    p.add_argument("--left")
    p.add_argument("--right")
    p.add_argument("--algorithm", choices=bench_mod.ALGORITHMS, default="proposed")
    p.add_argument("--out", required=True, help="output prefix")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("scenegen", help="render a synthetic stereo scene")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset")
    src.add_argument("--scene")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_scenegen)

    p = sub.add_parser("bench", help="time the planners on preset scenes")
    p.add_argument("--presets", nargs="*")
    p.add_argument("--algorithms", nargs="*", choices=bench_mod.ALGORITHMS, default=list(bench_mod.ALGORITHMS))
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--parallel", action="store_true", help="run scenes in parallel (rows flagged)")
    p.add_argument("--out", required=True, help="CSV path")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoPath as exc:
        print(f"no path: {exc}", file=sys.stderr)
        return EXIT_NOPATH
    except (StereoPlanError, UsageError, SceneFormatError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
