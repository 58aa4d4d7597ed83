"""Phong shading with geometry-aware light transport: per-geodesic lighting
pairs, intensity from the area density of geodesic spheres, hard and soft
shadows, and distance fog.

Sol has no exact lighting-pair solver; lights there use a continuous
straight-line direction field in the ambient coordinates with length-based
attenuation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import isotropic, nil, product, sl2
from .kernel import (
    DegenerateConfigurationError,
    GeometryId,
    GeometryPoint,
    PreconditionError,
    SolverFailureError,
    TangentVector,
    frame_coordinates,
    metric_dot,
    normalize_tangent,
    tangent_project,
)


@dataclass(eq=False)
class LightingPair:
    """One geodesic from a surface point to a light: unit direction (ambient
    coordinates at the surface point) and its length.  Rotation-invariant
    families on the symmetry axes of Nil and SL2 are flagged and reported by
    a single representative."""

    direction: np.ndarray
    length: float
    family: bool = False


@dataclass
class LightingConfig:
    intensity_mode: str = "exact"        # exact | inverse_length | constant
    max_geodesics: int = 2
    shadow: str = "none"                 # none | hard | soft
    soft_k: float = 5.0
    fog: str = "none"                    # none | linear | exp
    fog_k: float = 0.1
    fog_color: np.ndarray = field(default_factory=lambda: np.zeros(3))
    reflection_depth: int = 0
    intensity_clamp: float = 100.0       # cap as a multiple of I_light
    light_translates: str = "neighbors"  # none | neighbors (quotients only)

    def validate(self):
        if self.reflection_depth > 4:
            raise ValueError("reflection depth is capped at 4")
        if self.shadow == "soft" and self.soft_k < 1.0:
            raise ValueError("soft shadow parameter must be >= 1")

    def to_dict(self) -> dict:
        return {
            "intensity_mode": self.intensity_mode,
            "max_geodesics": self.max_geodesics,
            "shadow": self.shadow,
            "soft_k": self.soft_k,
            "fog": self.fog,
            "fog_k": self.fog_k,
            "fog_color": list(self.fog_color),
            "reflection_depth": self.reflection_depth,
            "intensity_clamp": self.intensity_clamp,
            "light_translates": self.light_translates,
        }


def lighting_pairs(s: GeometryPoint, q: GeometryPoint, max_pairs: int):
    """Dispatch the per-geometry lighting-pair computation.

    Sol falls back to the straight-line direction field with the ambient
    segment length standing in for geodesic length."""
    g = s.geometry
    if g in (GeometryId.E3, GeometryId.S3, GeometryId.H3):
        return isotropic.lighting_pairs(s, q, max_pairs)
    if g in (GeometryId.S2E, GeometryId.H2E):
        return product.lighting_pairs(s, q, max_pairs)
    if g is GeometryId.NIL:
        return nil.lighting_pairs(s, q, max_pairs)
    if g is GeometryId.SL2:
        return sl2.lighting_pairs(s, q, max_pairs)
    delta = q.coords - s.coords
    length = math.sqrt(float(delta @ delta))
    if length < 1e-12:
        raise DegenerateConfigurationError("light coincides with the point")
    v = tangent_project(s, delta)
    tv = normalize_tangent(TangentVector(s, v))
    return [LightingPair(tv.dir, length)]


def fog_factor(d: float, cfg: LightingConfig) -> float:
    """Weight of the surface color against the fog color."""
    if cfg.fog == "none":
        return 1.0
    if cfg.fog == "linear":
        return 1.0 - min(d / cfg.fog_k, 1.0)
    return math.exp(-cfg.fog_k * d)


def area_density_for(g: GeometryId, s: GeometryPoint, pair: LightingPair) -> float:
    """Area density at the light for the geodesic of this pair.  The reversed
    geodesic has the same invariants in every geometry with a closed form, so
    no extra flow is required."""
    d = pair.length
    if g in (GeometryId.E3, GeometryId.S3, GeometryId.H3):
        return isotropic.area_density(g, d)
    if g in (GeometryId.S2E, GeometryId.H2E):
        v3 = abs(float(pair.direction[3]))
        v3 = min(v3, 1.0)
        beta = math.acos(v3)
        return product.area_density(g, d, beta)
    if g is GeometryId.NIL:
        u3 = _frame_dir(s, pair.direction)
        return nil.area_density_direction(u3, d)
    if g is GeometryId.SL2:
        u3 = _frame_dir(s, pair.direction)
        return sl2.area_density_direction(u3, d)
    raise SolverFailureError("sol has no closed-form area density")


def _frame_dir(s: GeometryPoint, dir4: np.ndarray) -> np.ndarray:
    g = s.geometry
    if g is GeometryId.NIL:
        back = nil.left_isometry(s).inverse().matrix @ dir4
    else:
        back = sl2.left_isometry(s).inverse().matrix @ dir4
    return frame_coordinates(g, back)


def intensity(s: GeometryPoint, pair: LightingPair, light_intensity: float,
              cfg: LightingConfig) -> float:
    """Experienced intensity at the surface from one geodesic."""
    cap = cfg.intensity_clamp * light_intensity
    if cfg.intensity_mode == "constant":
        return light_intensity
    if cfg.intensity_mode == "inverse_length" or s.geometry is GeometryId.SOL:
        if pair.length < 1e-9:
            return cap
        return min(light_intensity / pair.length, cap)
    density = area_density_for(s.geometry, s, pair)
    if density < 1e-300 or pair.family:
        return cap
    return min(light_intensity / density, cap)


def reflect(n: np.ndarray, u: np.ndarray, p: GeometryPoint) -> np.ndarray:
    """Reflection of the tangent u in the surface with unit normal n at p."""
    return u - 2.0 * metric_dot(p, u, n) * n


def shadow_factor(s: GeometryPoint, pair: LightingPair, scene, cfg: LightingConfig,
                  march_cfg) -> float:
    if cfg.shadow == "none":
        return 1.0
    from .render import shadow_march
    return shadow_march(s, pair, scene, cfg, march_cfg)


def gather_pairs(s: GeometryPoint, light, scene, cfg: LightingConfig):
    """Lighting pairs from a light and (in quotients) its face translates."""
    positions = [light.position]
    if scene.quotient is not None and cfg.light_translates == "neighbors":
        for gen in scene.quotient.neighbor_set():
            positions.append(gen.apply_point(light.position))
    pairs = []
    for pos in positions:
        try:
            pairs.extend(lighting_pairs(s, pos, cfg.max_geodesics))
        except (DegenerateConfigurationError, SolverFailureError,
                PreconditionError):
            continue             # coincident, degenerate, or unreachable light
    pairs.sort(key=lambda pr: pr.length)
    return pairs[: cfg.max_geodesics]


def shade(scene, s: GeometryPoint, normal: np.ndarray, view: np.ndarray,
          d_view: float, leaf, cfg: LightingConfig, march_cfg) -> np.ndarray:
    """Color of the surface point s with outward normal, view direction
    (pointing back at the viewer) and view distance, before fog mixing."""
    from .scene import base_color, material_of
    mat = material_of(scene, leaf)
    color = base_color(scene, leaf, s)
    out = mat.k_amb * color.copy()
    for light in scene.lights:
        for pair in gather_pairs(s, light, scene, cfg):
            lam = metric_dot(s, normal, pair.direction)
            shade_w = shadow_factor(s, pair, scene, cfg, march_cfg)
            if shade_w <= 0.0:
                continue
            ii = intensity(s, pair, light.intensity, cfg)
            contrib = np.zeros(3)
            if lam > 0.0:
                contrib += mat.k_diff * lam * ii * (light.color * color)
            r = -reflect(normal, pair.direction, s)
            spec = metric_dot(s, r, view)
            if spec > 0.0 and mat.k_spec > 0.0:
                contrib += mat.k_spec * (spec ** mat.shininess) * ii * light.color
            out += shade_w * contrib
    return out
