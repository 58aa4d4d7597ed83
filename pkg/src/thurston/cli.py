"""Command-line entry points: offline rendering, the flow benchmark, the
geodesic probe, and the interactive viewer server."""
from __future__ import annotations

import argparse
import base64
import json
import math
import os
import socket
import sys
import time

import numpy as np

from . import wsserver
from .integrators import BenchConfig, rows_to_csv, run_benchmark
from .kernel import (
    GeometryId,
    GeometryPoint,
    PreconditionError,
    SolverFailureError,
    apply_move,
    origin,
    renormalize,
    rotate_pose,
)
from .lighting import LightingConfig
from .render import Camera, MarchConfig, render_frame
from .scene import SceneFormatError, load_scene

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_IO = 3
EXIT_SOLVER = 4

FRAME_PIXEL_CAP = 640 * 480


def _default_threads() -> int:
    env = os.environ.get("THURSTON_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _march_config(args) -> MarchConfig:
    return MarchConfig(eps=args.eps, max_steps=args.max_steps,
                       max_dist=args.max_dist, step_scale=args.step_scale)


def _lighting_config(args) -> LightingConfig:
    cfg = LightingConfig()
    cfg.intensity_mode = args.intensity
    cfg.max_geodesics = args.max_geodesics
    cfg.shadow = args.shadow
    cfg.soft_k = args.soft_k
    cfg.fog = args.fog
    cfg.fog_k = args.fog_k
    cfg.fog_color = np.array(
        [float(x) for x in args.fog_color.split(",")]) if args.fog_color else np.zeros(3)
    cfg.reflection_depth = args.reflect_depth
    return cfg


def _add_render_flags(sub):
    sub.add_argument("--scene", required=False)
    sub.add_argument("--width", type=int, default=320)
    sub.add_argument("--height", type=int, default=180)
    sub.add_argument("--fov", type=float, default=100.0)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--eps", type=float, default=1e-4)
    sub.add_argument("--max-steps", type=int, default=120)
    sub.add_argument("--max-dist", type=float, default=50.0)
    sub.add_argument("--step-scale", type=float, default=1.0)
    sub.add_argument("--intensity", default="exact",
                     choices=["exact", "inverse_length", "constant"])
    sub.add_argument("--max-geodesics", type=int, default=2)
    sub.add_argument("--shadow", default="none", choices=["none", "hard", "soft"])
    sub.add_argument("--soft-k", type=float, default=5.0)
    sub.add_argument("--fog", default="none", choices=["none", "linear", "exp"])
    sub.add_argument("--fog-k", type=float, default=0.1)
    sub.add_argument("--fog-color", default="")
    sub.add_argument("--reflect-depth", type=int, default=0)


def cmd_render(args) -> int:
    if args.print_defaults:
        print(json.dumps({"march": MarchConfig().to_dict(),
                          "lighting": LightingConfig().to_dict()}, indent=2))
        return EXIT_OK
    if not args.scene:
        print("error: --scene is required", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        scene = load_scene(args.scene)
    except (SceneFormatError, json.JSONDecodeError, OSError, ValueError) as exc:
        print(f"error: bad scene: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    camera = Camera(scene.camera, fov=args.fov, width=args.width,
                    height=args.height)
    threads = args.threads if args.threads else _default_threads()
    t0 = time.perf_counter()
    try:
        image = render_frame(camera, scene, _lighting_config(args),
                             _march_config(args), threads=threads)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    elapsed = time.perf_counter() - t0
    try:
        with open(args.out, "wb") as fh:
            fh.write(image.to_ppm())
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    rays = args.width * args.height
    print(f"rendered {args.width}x{args.height} in {elapsed:.2f}s "
          f"({rays / max(elapsed, 1e-9):.0f} rays/s, {threads} workers)",
          file=sys.stderr)
    return EXIT_OK


def cmd_bench_flow(args) -> int:
    try:
        g = GeometryId.parse(args.geometry)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    cfg = BenchConfig(
        g, n=args.n, t=args.t,
        methods=tuple(args.methods.split(",")),
        dts=tuple(float(x) for x in args.dt.split(",")),
        seed=args.seed,
        threshold_deg=args.threshold)
    try:
        rows = run_benchmark(cfg)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    csv = rows_to_csv(rows)
    if args.out:
        try:
            with open(args.out, "w", encoding="ascii") as fh:
                fh.write(csv)
        except OSError as exc:
            print(f"error: cannot write output: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def cmd_probe(args) -> int:
    try:
        g = GeometryId.parse(args.geometry)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    from . import lighting as lighting_mod
    if args.cyl:
        if g not in (GeometryId.SL2, GeometryId.NIL):
            print("error: --cyl applies to nil and sl2 only", file=sys.stderr)
            return EXIT_BAD_INPUT
        rho, theta, w = (float(x) for x in args.cyl.split(","))
        if g is GeometryId.SL2:
            from . import sl2
            h = np.array([math.sinh(rho) * math.cos(theta),
                          math.sinh(rho) * math.sin(theta), math.cosh(rho)])
            target = sl2.point_from_h2_fiber(h, w)
        else:
            target = GeometryPoint(g, np.array(
                [rho * math.cos(theta), rho * math.sin(theta), w, 1.0]))
    elif args.point:
        coords = [float(x) for x in args.point.split(",")]
        if len(coords) not in (4, 5):
            print("error: --point takes 4 (or 5 for sl2) numbers",
                  file=sys.stderr)
            return EXIT_BAD_INPUT
        target = GeometryPoint(g, np.array(coords[:4]))
        if g is GeometryId.SL2:
            from . import sl2
            target.fiber = coords[4] if len(coords) == 5 \
                else sl2.fiber_mod(target.coords)
        target = renormalize(target)
    else:
        print("error: give --point or --cyl", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        pairs = lighting_mod.lighting_pairs(origin(g), target, args.max_pairs)
    except SolverFailureError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    for pr in pairs:
        print(json.dumps({"direction": [float(x) for x in pr.direction],
                          "length": pr.length, "family": pr.family}))
    return EXIT_OK


def _pose_message(pose) -> dict:
    msg = {"type": "pose",
           "g": [float(x) for x in pose.g.matrix.reshape(-1)],
           "m": [float(x) for x in pose.m.reshape(-1)]}
    if pose.geometry is GeometryId.SL2:
        msg["fiber"] = float(pose.g.fiber_shift)
    return msg


def _frame_message(camera, scene, light_cfg, march_cfg, threads) -> dict:
    image = render_frame(camera, scene, light_cfg, march_cfg, threads=threads)
    return {"type": "frame", "w": image.width, "h": image.height,
            "pixels": base64.b64encode(image.to_rgb8()).decode("ascii")}


def cmd_serve(args) -> int:
    try:
        scene = load_scene(args.scene)
    except (SceneFormatError, json.JSONDecodeError, OSError, ValueError) as exc:
        print(f"error: bad scene: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    light_cfg = _lighting_config(args)
    march_cfg = _march_config(args)
    threads = args.threads if args.threads else 1
    pose = scene.camera.copy()
    width, height = args.width, args.height
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        srv.bind((args.host, args.port))
    except OSError as exc:
        print(f"error: cannot bind port: {exc}", file=sys.stderr)
        return EXIT_IO
    srv.listen(1)
    bound = srv.getsockname()[1]
    print(f"serving on ws://{args.host}:{bound}", file=sys.stderr, flush=True)
    sessions = 0
    try:
        while True:
            raw_sock, _addr = srv.accept()
            sessions += 1
            try:
                conn = wsserver.accept_connection(raw_sock)
                camera = Camera(pose, fov=args.fov, width=width, height=height)
                hello = {"type": "hello", "geometry": scene.geometry.value,
                         "pose": _pose_message(pose)}
                conn.send_text(json.dumps(hello))
                conn.send_text(json.dumps(
                    _frame_message(camera, scene, light_cfg, march_cfg, threads)))
                while True:
                    raw = conn.recv()
                    if raw is None:
                        break
                    msg = json.loads(raw)
                    kind = msg.get("type")
                    if kind == "move":
                        dv = np.array([float(x) for x in msg["dv"]])
                        if not np.all(np.isfinite(dv)):
                            continue
                        pose = apply_move(pose, dv)
                    elif kind == "rotate":
                        pose = rotate_pose(pose,
                                           yaw=float(msg.get("yaw", 0.0)),
                                           pitch=float(msg.get("pitch", 0.0)),
                                           roll=float(msg.get("roll", 0.0)))
                    elif kind == "resize":
                        w = int(msg["w"])
                        h = int(msg["h"])
                        if w >= 1 and h >= 1 and w * h <= FRAME_PIXEL_CAP:
                            width, height = w, h
                    elif kind == "config":
                        patch = msg.get("patch", {})
                        for key, val in patch.items():
                            if hasattr(light_cfg, key):
                                setattr(light_cfg, key, val)
                    else:
                        continue
                    camera = Camera(pose, fov=args.fov, width=width,
                                    height=height)
                    conn.send_text(json.dumps(_pose_message(pose)))
                    conn.send_text(json.dumps(
                        _frame_message(camera, scene, light_cfg, march_cfg,
                                       threads)))
            except (wsserver.WsError, OSError, json.JSONDecodeError,
                    KeyError, ValueError):
                pass
            finally:
                raw_sock.close()
            if args.max_sessions and sessions >= args.max_sessions:
                break
    finally:
        srv.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thurston",
        description="Ray-marching renderer for the eight Thurston geometries")
    subs = parser.add_subparsers(dest="command", required=True)

    p_render = subs.add_parser("render", help="render a scene to a PPM image")
    _add_render_flags(p_render)
    p_render.add_argument("--out", default="out.ppm")
    p_render.add_argument("--print-defaults", action="store_true")
    p_render.set_defaults(fn=cmd_render)

    p_bench = subs.add_parser("bench-flow",
                              help="geodesic integrator accuracy benchmark")
    p_bench.add_argument("--geometry", required=True)
    p_bench.add_argument("--t", type=float, default=6.0)
    p_bench.add_argument("--n", type=int, default=1000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--methods", default="euler,rk2,rk4")
    p_bench.add_argument("--dt", default="0.1,0.01")
    p_bench.add_argument("--threshold", type=float, default=None)
    p_bench.add_argument("--out", default="")
    p_bench.set_defaults(fn=cmd_bench_flow)

    p_probe = subs.add_parser("probe",
                              help="print the geodesics from the origin to a point")
    p_probe.add_argument("--geometry", required=True)
    p_probe.add_argument("--point", default="")
    p_probe.add_argument("--cyl", default="",
                         help="rho,theta,w cylindrical target (nil, sl2)")
    p_probe.add_argument("--max-pairs", type=int, default=8)
    p_probe.set_defaults(fn=cmd_probe)

    p_serve = subs.add_parser("serve", help="serve the interactive viewer")
    _add_render_flags(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--max-sessions", type=int, default=0,
                         help="exit after this many sessions (0 = run forever)")
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
