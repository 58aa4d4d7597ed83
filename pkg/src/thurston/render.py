"""Ray marching and frame production.

Rays advance by the current signed distance (times an optional scale), clamp
their steps at fundamental-domain walls when a quotient is active (creeping),
and teleport back inside after crossing.  Pixels are independent, so frames
are deterministic for any worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lighting as lighting_mod
from .kernel import (
    GeometryId,
    GeometryPoint,
    TangentVector,
    flow,
    frame_coordinates,
    metric_dot,
    normalize_tangent,
    origin,
    tangent_from_frame,
    tangent_project,
)
from .quotient import teleport
from .scene import Scene, effective_sdf, material_of


@dataclass
class MarchConfig:
    eps: float = 1e-4
    max_steps: int = 120
    max_dist: float = 50.0
    step_scale: float = 1.0
    normal_eps: float = 1e-4
    creep_bisections: int = 32

    def validate(self):
        if self.eps <= 0.0 or self.max_steps < 1:
            raise ValueError("march config requires eps > 0 and max_steps >= 1")

    def to_dict(self) -> dict:
        return {"eps": self.eps, "max_steps": self.max_steps,
                "max_dist": self.max_dist, "step_scale": self.step_scale,
                "normal_eps": self.normal_eps,
                "creep_bisections": self.creep_bisections}


@dataclass(eq=False)
class Camera:
    pose: object
    fov: float = 100.0
    width: int = 64
    height: int = 64

    def validate(self):
        if not (0.0 < self.fov < 180.0):
            raise ValueError("field of view must lie in (0, 180) degrees")


@dataclass(eq=False)
class MarchHit:
    hit: bool
    point: GeometryPoint | None
    tangent: TangentVector | None
    distance: float
    steps: int
    leaf: object = None


from .kernel import advance as _advance


def march(ray: TangentVector, scene: Scene, cfg: MarchConfig,
          for_shadow: bool = False, max_dist: float | None = None) -> MarchHit:
    """March a unit ray against the scene until a hit, a distance cap, or the
    step cap."""
    qs = scene.quotient
    v = ray
    if qs is not None:
        moved, iso = teleport(qs, v.base)
        if iso is not None:
            v = TangentVector(moved, iso.matrix @ v.dir)
    total = 0.0
    limit = cfg.max_dist if max_dist is None else min(cfg.max_dist, max_dist)
    for step in range(cfg.max_steps):
        sigma, leaf = effective_sdf(scene, v.base, for_shadow)
        if sigma < cfg.eps:
            return MarchHit(True, v.base, v, total, step, leaf)
        advance = min(sigma * cfg.step_scale, limit - total + 2.0 * cfg.eps)
        if advance <= 0.0:
            break
        if qs is None or scene.creep == "none":
            nxt = _advance(v, advance)
            if qs is not None and not qs.inside(nxt.base):
                moved, iso = teleport(qs, nxt.base)
                nxt = TangentVector(moved, iso.matrix @ nxt.dir)
            v = nxt
            total += advance
        else:
            v, walked = _creep_step(v, advance, scene, cfg)
            total += walked
        if total > limit:
            return MarchHit(False, v.base, v, total, step + 1, None)
    return MarchHit(False, v.base, v, total, cfg.max_steps, None)


def _creep_step(v: TangentVector, advance: float, scene: Scene,
                cfg: MarchConfig):
    """Advance by at most the proposed step, stopping just outside the domain
    wall and teleporting back inside."""
    qs = scene.quotient
    if scene.creep == "march" and qs.wall_sdf is not None:
        wall = qs.wall_sdf(v.base)
        advance = min(advance, max(wall, 0.0) + 0.5 * cfg.eps)
    elif scene.creep == "trace" and v.geometry is GeometryId.E3:
        cross = _trace_crossing(v, qs)
        if cross is not None and cross < advance:
            advance = cross + 0.5 * cfg.eps
    trial = _advance(v, advance)
    if qs.inside(trial.base):
        return trial, advance
    # binary search for the crossing parameter
    if v.geometry is GeometryId.E3:
        # straight-line model: the functionals are affine along the ray
        vb = (qs._coeffs @ v.base.coords).tolist()
        vd = (qs._coeffs @ v.dir).tolist()
        t_in, t_out = 0.0, advance
        for _ in range(cfg.creep_bisections):
            mid = 0.5 * (t_in + t_out)
            if max(b + mid * d for b, d in zip(vb, vd)) <= 1e-12:
                t_in = mid
            else:
                t_out = mid
    else:
        from .kernel import _module
        posfn = getattr(_module(v.geometry), "ray_position_fn", None)
        t_in, t_out = 0.0, advance
        if posfn is not None:
            pos = posfn(v)
            probe = GeometryPoint(v.geometry, np.zeros(4))
            probe.coords[3] = 1.0
            for _ in range(cfg.creep_bisections):
                mid = 0.5 * (t_in + t_out)
                probe.coords[0], probe.coords[1], probe.coords[2] = pos(mid)
                if qs.inside(probe):
                    t_in = mid
                else:
                    t_out = mid
        else:
            for _ in range(cfg.creep_bisections):
                mid = 0.5 * (t_in + t_out)
                if qs.inside(_advance(v, mid).base):
                    t_in = mid
                else:
                    t_out = mid
    landed = _advance(v, t_out)
    moved, iso = teleport(qs, landed.base)
    return TangentVector(moved, iso.matrix @ landed.dir), t_out


def _trace_crossing(v: TangentVector, qs) -> float | None:
    """Exact wall-crossing parameter for straight-line models."""
    base = qs._coeffs @ v.base.coords
    slope = qs._coeffs @ v.dir
    best = None
    for i in range(len(base)):
        if slope[i] > 1e-15:
            t = -base[i] / slope[i]
            if t > 0.0 and (best is None or t < best):
                best = t
    return best


def shadow_march(s: GeometryPoint, pair, scene: Scene,
                 light_cfg, march_cfg: MarchConfig) -> float:
    """Occlusion factor along the geodesic from s toward a light."""
    offset = 4.0 * march_cfg.eps
    ray = TangentVector(s, pair.direction)
    ray = normalize_tangent(ray)
    start = _advance(ray, offset)
    travel_cap = pair.length - 8.0 * march_cfg.eps
    if travel_cap <= offset:
        return 1.0
    if light_cfg.shadow == "hard":
        hit = march(start, scene, march_cfg, for_shadow=True,
                    max_dist=travel_cap - offset)
        return 0.0 if hit.hit else 1.0
    # soft: track min of k * sigma(gamma(t)) / t along the way
    qs = scene.quotient
    v = start
    if qs is not None:
        moved, iso = teleport(qs, v.base)
        v = TangentVector(moved, iso.matrix @ v.dir)
    total = offset
    factor = 1.0
    for _ in range(march_cfg.max_steps):
        sigma, _leaf = effective_sdf(scene, v.base, True)
        if sigma < march_cfg.eps:
            return 0.0
        factor = min(factor, light_cfg.soft_k * sigma / total)
        advance = sigma * march_cfg.step_scale
        if total + advance >= travel_cap:
            break
        if qs is None:
            v = _advance(v, advance)
        else:
            v, advance = _creep_step(v, advance, scene, march_cfg)
        total += advance
    return max(0.0, min(1.0, factor))


# --- normals ----------------------------------------------------------------------

def surface_frame(p: GeometryPoint) -> np.ndarray:
    """Columns: an orthonormal tangent frame at p, continuous wherever the
    geometry allows a continuous global choice."""
    g = p.geometry
    if g in (GeometryId.E3, GeometryId.NIL, GeometryId.SOL):
        from . import nil as nil_mod, sol as sol_mod
        if g is GeometryId.E3:
            f = np.zeros((4, 3))
            f[0, 0] = f[1, 1] = f[2, 2] = 1.0
            return f
        mod = nil_mod if g is GeometryId.NIL else sol_mod
        lin = mod.left_isometry(p).matrix
        return lin @ np.vstack([np.eye(3), np.zeros(3)])
    if g is GeometryId.SL2:
        from . import sl2 as sl2_mod
        from .kernel import reference_frame
        return sl2_mod.left_isometry(p).matrix @ reference_frame(g)
    if g is GeometryId.S3:
        c = p.coords
        x, y, z, w = c
        f = np.zeros((4, 3))
        f[:, 0] = [w, -z, y, -x]      # left multiplication by the unit i
        f[:, 1] = [z, w, -x, -y]
        f[:, 2] = [-y, x, w, -z]
        return f
    # H3 and the products: project canonical vectors and orthonormalize
    cands = [np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0, 0.0]),
             np.array([0.0, 0.0, 1.0, 0.0]), np.array([0.0, 0.0, 0.0, 1.0])]
    cols = []
    for cand in cands:
        v = tangent_project(p, cand)
        for prev in cols:
            v = v - metric_dot(p, prev, v) * prev
        n = metric_dot(p, v, v)
        if n > 1e-12:
            cols.append(v / math.sqrt(n))
        if len(cols) == 3:
            break
    return np.stack(cols, axis=1)


def normal_at(scene: Scene, p: GeometryPoint, cfg: MarchConfig) -> np.ndarray:
    """Outward unit surface normal from central differences of the SDF."""
    frame = surface_frame(p)
    eps = cfg.normal_eps
    grads = []
    for i in range(3):
        v = TangentVector(p, frame[:, i])
        plus = _advance(v, eps).base
        minus = _advance(v, -eps).base
        fp, _ = effective_sdf(scene, plus)
        fm, _ = effective_sdf(scene, minus)
        grads.append((fp - fm) / (2.0 * eps))
    n = frame @ np.array(grads)
    norm = math.sqrt(max(metric_dot(p, n, n), 1e-300))
    return n / norm


# --- frame rendering -----------------------------------------------------------------

@dataclass(eq=False)
class Image:
    width: int
    height: int
    pixels: np.ndarray      # (height, width, 3) linear floats

    def to_rgb8(self) -> bytes:
        gamma = np.clip(self.pixels, 0.0, 1.0) ** (1.0 / 2.2)
        return np.round(gamma * 255.0).astype(np.uint8).tobytes()

    def to_ppm(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.to_rgb8()


def pixel_ray(camera: Camera, scene: Scene, col: int, row: int) -> TangentVector:
    g = scene.geometry
    half = math.tan(math.radians(camera.fov) / 2.0)
    s = (2.0 * (col + 0.5) / camera.width - 1.0) * half
    t = -(2.0 * (row + 0.5) / camera.height - 1.0) * half * \
        (camera.height / camera.width)
    local = np.array([s, t, -1.0])
    dframe = camera.pose.m @ local
    o = origin(g)
    amb = tangent_from_frame(o, dframe)
    v = camera.pose.g.apply_tangent(TangentVector(o, amb))
    return normalize_tangent(v)


def shade_ray(ray: TangentVector, scene: Scene, light_cfg, march_cfg: MarchConfig,
              depth: int = 0) -> np.ndarray:
    hit = march(ray, scene, march_cfg)
    if not hit.hit:
        return light_cfg.fog_color.copy()
    p = hit.point
    n = normal_at(scene, p, march_cfg)
    view = -hit.tangent.dir
    view = view / math.sqrt(max(metric_dot(p, view, view), 1e-300))
    # flip the normal toward the viewer for complement surfaces
    if metric_dot(p, n, view) < 0.0:
        n = -n
    col = lighting_mod.shade(scene, p, n, view, hit.distance, hit.leaf,
                             light_cfg, march_cfg)
    mat = material_of(scene, hit.leaf)
    if mat.reflectivity > 0.0 and depth < light_cfg.reflection_depth:
        rdir = lighting_mod.reflect(n, hit.tangent.dir, p)
        rstart = _advance(normalize_tangent(TangentVector(p, rdir)),
                          4.0 * march_cfg.eps)
        rcol = shade_ray(rstart, scene, light_cfg, march_cfg, depth + 1)
        col = (1.0 - mat.reflectivity) * col + mat.reflectivity * rcol
    fog = lighting_mod.fog_factor(hit.distance, light_cfg)
    return fog * col + (1.0 - fog) * light_cfg.fog_color


def render_rows(camera: Camera, scene: Scene, light_cfg, march_cfg: MarchConfig,
                rows: range) -> np.ndarray:
    out = np.zeros((len(rows), camera.width, 3))
    for i, row in enumerate(rows):
        for col in range(camera.width):
            ray = pixel_ray(camera, scene, col, row)
            out[i, col] = shade_ray(ray, scene, light_cfg, march_cfg)
    return out


def render_frame(camera: Camera, scene: Scene, light_cfg, march_cfg: MarchConfig,
                 threads: int = 1) -> Image:
    """Render a frame; the output is bit-identical for any worker count."""
    camera.validate()
    march_cfg.validate()
    light_cfg.validate()
    if threads <= 1:
        pixels = render_rows(camera, scene, light_cfg, march_cfg,
                             range(camera.height))
        return Image(camera.width, camera.height, pixels)
    from concurrent.futures import ProcessPoolExecutor
    chunk = max(1, math.ceil(camera.height / threads))
    ranges = [range(lo, min(lo + chunk, camera.height))
              for lo in range(0, camera.height, chunk)]
    parts = []
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(render_rows, camera, scene, light_cfg,
                               march_cfg, rng) for rng in ranges]
        for fut in futures:
            parts.append(fut.result())
    return Image(camera.width, camera.height, np.concatenate(parts, axis=0))
