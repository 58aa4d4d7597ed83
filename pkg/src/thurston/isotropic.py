"""The isotropic geometries: euclidean space, the three-sphere, and
hyperbolic space in their linear R^4 models.

Geodesics are orbits of one-parameter isometry subgroups, so flows are closed
form, parallel transport is the differential of the subgroup, and lighting
reduces to linear algebra in the ambient space.
"""
from __future__ import annotations

import math

import numpy as np

from .kernel import (
    DegenerateConfigurationError,
    FlowResult,
    GeometryId,
    GeometryPoint,
    Isometry,
    OriginFlow,
    TangentVector,
    origin,
    renormalize,
    tangent_from_frame,
)

E3, S3, H3 = GeometryId.E3, GeometryId.S3, GeometryId.H3


def _minkowski(u: np.ndarray, v: np.ndarray) -> float:
    return float(u[0] * v[0] + u[1] * v[1] + u[2] * v[2] - u[3] * v[3])


def _orbit_isometry(g: GeometryId, p: np.ndarray, v: np.ndarray, t: float) -> Isometry:
    """One-parameter subgroup moving p along the geodesic directed by v."""
    if g is E3:
        m = np.eye(4)
        m[:3, 3] = t * v[:3]
        return Isometry(g, m)
    if g is S3:
        ct, st = math.cos(t), math.sin(t)
        outer_vp = np.outer(v, p)
        m = (np.eye(4) + st * (outer_vp - outer_vp.T)
             + (ct - 1.0) * (np.outer(p, p) + np.outer(v, v)))
        return Isometry(g, m)
    # H3: boost in span(p, v) with respect to the Minkowski form
    J = np.diag([1.0, 1.0, 1.0, -1.0])
    ch, sh = math.cosh(t), math.sinh(t)
    proj_p = -np.outer(p, J @ p)
    proj_v = np.outer(v, J @ v)
    swap = np.outer(v, J @ p) * (-1.0) + np.outer(p, J @ v)
    m = np.eye(4) + (ch - 1.0) * (proj_p + proj_v) + sh * swap
    return Isometry(g, m)


def flow_at(v: TangentVector, t: float, want_transport: bool) -> FlowResult:
    g = v.geometry
    p, d = v.base.coords, v.dir
    if g is E3:
        end_c = p + t * d
        end_d = d.copy()
    elif g is S3:
        end_c = math.cos(t) * p + math.sin(t) * d
        end_d = -math.sin(t) * p + math.cos(t) * d
    else:
        end_c = math.cosh(t) * p + math.sinh(t) * d
        end_d = math.sinh(t) * p + math.cosh(t) * d
    end = GeometryPoint(g, end_c)
    iso = _orbit_isometry(g, p, d, t)
    return FlowResult(end, TangentVector(end, end_d),
                      np.eye(3) if want_transport else None, iso)


def advance(v: TangentVector, t: float) -> TangentVector:
    """Marching fast path: endpoint and tangent only."""
    g = v.geometry
    p, d = v.base.coords, v.dir
    if g is E3:
        return TangentVector(GeometryPoint(g, p + t * d), d)
    if g is S3:
        ct, st = math.cos(t), math.sin(t)
        return TangentVector(GeometryPoint(g, ct * p + st * d), ct * d - st * p)
    ch, sh = math.cosh(t), math.sinh(t)
    return TangentVector(GeometryPoint(g, ch * p + sh * d), ch * d + sh * p)


def flow_origin(g: GeometryId, u3: np.ndarray, t: float,
                want_transport: bool) -> OriginFlow:
    o = origin(g)
    d = tangent_from_frame(o, u3)
    res = flow_at(TangentVector(o, d), t, want_transport)
    # endpoint tangent back in frame coordinates: frame vectors are e_x,e_y,e_z
    u_end = res.end_isometry.matrix[:3, :3].T @ res.tangent.dir[:3] \
        if g is not E3 else u3.copy()
    if g is not E3:
        # the subgroup is orthogonal for these models in the frame sense:
        # pull the endpoint tangent back with the inverse isometry
        back = np.linalg.inv(res.end_isometry.matrix) @ res.tangent.dir
        u_end = back[:3]
    return OriginFlow(res.end, res.end_isometry, u_end,
                      np.eye(3) if want_transport else None)


def distance(p: GeometryPoint, q: GeometryPoint) -> float:
    g = p.geometry
    a, b = p.coords, q.coords
    if g is E3:
        return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2
                         + (a[2] - b[2]) ** 2)
    if g is S3:
        c = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
        return math.acos(min(1.0, max(-1.0, c)))
    c = -(a[0] * b[0] + a[1] * b[1] + a[2] * b[2] - a[3] * b[3])
    return math.acosh(max(1.0, c))


# --- signed distance functions (primitives in standard position) -----------

def sdf_ball(g: GeometryId, r: float, p: GeometryPoint) -> float:
    return distance(origin(g), p) - r


def sdf_cylinder(g: GeometryId, r: float, p: GeometryPoint) -> float:
    """Solid cylinder of radius r about the z-axis geodesic through o."""
    c = p.coords
    if g is E3:
        return math.hypot(c[0], c[1]) - r
    if g is S3:
        s = min(1.0, math.hypot(c[3], c[2]))
        return math.acos(s) - r
    q = max(1.0, math.sqrt(max(c[3] ** 2 - c[2] ** 2, 1.0)))
    return math.acosh(q) - r


def sdf_half_space(g: GeometryId, p: GeometryPoint) -> float:
    """Half-space {z <= 0}."""
    z = p.coords[2]
    if g is E3:
        return float(z)
    if g is S3:
        return math.asin(min(1.0, max(-1.0, float(z))))
    return math.asinh(float(z))


# --- lighting ----------------------------------------------------------------

ANTIPODAL_TOL = 1e-9


def lighting_pairs(s: GeometryPoint, q: GeometryPoint, max_pairs: int = 4):
    """Directions and lengths of the geodesics from s to the light at q.

    Euclidean and hyperbolic space give a single pair; the sphere gives the
    short way and the long way around (longer wraps never matter for opaque
    scenes).  Antipodal spherical configurations are degenerate.
    """
    from .lighting import LightingPair
    g = s.geometry
    if g is E3:
        d = q.coords - s.coords
        dist = math.sqrt(float(d @ d))
        if dist == 0.0:
            raise DegenerateConfigurationError("light coincides with the surface point")
        return [LightingPair(d / dist, dist)]
    if g is S3:
        cos_th = min(1.0, max(-1.0, float(s.coords @ q.coords)))
        if cos_th < -1.0 + ANTIPODAL_TOL:
            raise DegenerateConfigurationError("antipodal points on the sphere")
        theta = math.acos(cos_th)
        if theta < 1e-12:
            raise DegenerateConfigurationError("light coincides with the surface point")
        v = (q.coords - cos_th * s.coords) / math.sin(theta)
        pairs = [LightingPair(v, theta), LightingPair(-v, 2.0 * math.pi - theta)]
        return pairs[:max_pairs]
    ch = max(1.0, -_minkowski(s.coords, q.coords))
    delta = math.acosh(ch)
    if delta < 1e-12:
        raise DegenerateConfigurationError("light coincides with the surface point")
    v = (q.coords - ch * s.coords) / math.sinh(delta)
    return [LightingPair(v, delta)]


def area_density(g: GeometryId, r: float) -> float:
    """Area density of geodesic spheres; intensity is I_light / density."""
    if g is E3:
        return r * r
    if g is S3:
        return math.sin(r) ** 2
    return math.sinh(r) ** 2
