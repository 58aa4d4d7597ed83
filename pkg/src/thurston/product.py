"""The product geometries S^2 x E and H^2 x E.

Points are stored as [y0, y1, y2, w] with the first three coordinates on the
unit sphere or the hyperboloid and w the euclidean factor.  Geodesics split
into a factor geodesic run at speed |v_Y| and a linear motion in w.
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
    tangent_from_frame,
)

S2E, H2E = GeometryId.S2E, GeometryId.H2E

VERTICAL_TOL = 1e-12
SMALL_ANGLE = 1e-4          # series switch for the removable sin(beta) factor


# --- two-dimensional factor helpers (shared with the SL2 module) ------------

def mink2(u: np.ndarray, v: np.ndarray) -> float:
    return float(u[0] * v[0] + u[1] * v[1] - u[2] * v[2])


def s2_distance(a: np.ndarray, b: np.ndarray) -> float:
    return math.acos(min(1.0, max(-1.0, float(a @ b))))


def h2_distance(a: np.ndarray, b: np.ndarray) -> float:
    return math.acosh(max(1.0, -mink2(a, b)))


def s2_direction(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unit tangent at a pointing along the short geodesic to b."""
    d = s2_distance(a, b)
    if d < 1e-12 or d > math.pi - 1e-12:
        raise DegenerateConfigurationError("coincident or antipodal sphere points")
    return (b - math.cos(d) * a) / math.sin(d)

def h2_direction(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = h2_distance(a, b)
    if d < 1e-12:
        raise DegenerateConfigurationError("coincident hyperbolic points")
    return (b - math.cosh(d) * a) / math.sinh(d)


def h2_geodesic_point(a: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    return math.cosh(t) * a + math.sinh(t) * v


def s2_geodesic_point(a: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    return math.cos(t) * a + math.sin(t) * v


# --- flows -------------------------------------------------------------------

def _factor_rotation(g: GeometryId, q: np.ndarray, vy_unit: np.ndarray,
                     arc: float) -> np.ndarray:
    """3x3 factor isometry moving q along the geodesic directed by vy_unit."""
    if g is S2E:
        c, s = math.cos(arc), math.sin(arc)
        ovq = np.outer(vy_unit, q)
        return (np.eye(3) + s * (ovq - ovq.T)
                + (c - 1.0) * (np.outer(q, q) + np.outer(vy_unit, vy_unit)))
    J = np.diag([1.0, 1.0, -1.0])
    ch, sh = math.cosh(arc), math.sinh(arc)
    proj_q = -np.outer(q, J @ q)
    proj_v = np.outer(vy_unit, J @ vy_unit)
    swap = -np.outer(vy_unit, J @ q) + np.outer(q, J @ vy_unit)
    return np.eye(3) + (ch - 1.0) * (proj_q + proj_v) + sh * swap


def flow_at(v: TangentVector, t: float, want_transport: bool) -> FlowResult:
    g = v.geometry
    q = v.base.coords[:3]
    w = v.base.coords[3]
    vy = v.dir[:3]
    ve = float(v.dir[3])
    # factor speed in the factor metric
    lam = math.sqrt(max(float(vy @ vy) if g is S2E else mink2(vy, vy), 0.0))
    if lam < VERTICAL_TOL:
        end_c = np.array([q[0], q[1], q[2], w + t * ve])
        end = GeometryPoint(g, end_c)
        m = np.eye(4)
        iso = Isometry(g, m, t * ve)
        return FlowResult(end, TangentVector(end, v.dir.copy()),
                          np.eye(3) if want_transport else None, iso)
    arc = lam * t
    vy_unit = vy / lam
    if g is S2E:
        qe = math.cos(arc) * q + math.sin(arc) * vy_unit
        te = lam * (-math.sin(arc) * q + math.cos(arc) * vy_unit)
    else:
        qe = math.cosh(arc) * q + math.sinh(arc) * vy_unit
        te = lam * (math.sinh(arc) * q + math.cosh(arc) * vy_unit)
    end_c = np.array([qe[0], qe[1], qe[2], w + t * ve])
    end = GeometryPoint(g, end_c)
    dir4 = np.array([te[0], te[1], te[2], ve])
    rot = _factor_rotation(g, q, vy_unit, arc)
    m = np.eye(4)
    m[:3, :3] = rot
    iso = Isometry(g, m, t * ve)
    return FlowResult(end, TangentVector(end, dir4),
                      np.eye(3) if want_transport else None, iso)


def flow_origin(g: GeometryId, u3: np.ndarray, t: float,
                want_transport: bool) -> OriginFlow:
    o = origin(g)
    d = tangent_from_frame(o, u3)
    res = flow_at(TangentVector(o, d), t, want_transport)
    return OriginFlow(res.end, res.end_isometry, u3.copy(),
                      np.eye(3) if want_transport else None)


def advance(v: TangentVector, t: float) -> TangentVector:
    """Marching fast path: endpoint and tangent only."""
    g = v.geometry
    q = v.base.coords[:3]
    w = v.base.coords[3]
    vy = v.dir[:3]
    ve = v.dir[3]
    lam2 = float(vy @ vy) if g is S2E else mink2(vy, vy)
    if lam2 < VERTICAL_TOL * VERTICAL_TOL:
        end = np.array([q[0], q[1], q[2], w + t * ve])
        return TangentVector(GeometryPoint(g, end), v.dir)
    lam = math.sqrt(max(lam2, 0.0))
    arc = lam * t
    if g is S2E:
        c, s = math.cos(arc), math.sin(arc)
        qe = c * q + (s / lam) * vy
        te = c * vy - (s * lam) * q
    else:
        c, s = math.cosh(arc), math.sinh(arc)
        qe = c * q + (s / lam) * vy
        te = c * vy + (s * lam) * q
    return TangentVector(GeometryPoint(g, np.array([qe[0], qe[1], qe[2],
                                                    w + t * ve])),
                         np.array([te[0], te[1], te[2], ve]))


def distance(p: GeometryPoint, q: GeometryPoint) -> float:
    g = p.geometry
    dy = (s2_distance if g is S2E else h2_distance)(p.coords[:3], q.coords[:3])
    dw = q.coords[3] - p.coords[3]
    return math.hypot(dy, dw)


# --- signed distance functions ----------------------------------------------

def sdf_ball(g: GeometryId, r: float, p: GeometryPoint) -> float:
    return distance(origin(g), p) - r


def sdf_vertical_cylinder(g: GeometryId, r: float, p: GeometryPoint) -> float:
    """Solid cylinder of radius r around the fiber over the factor origin."""
    oy = origin(g).coords[:3]
    dy = (s2_distance if g is S2E else h2_distance)(oy, p.coords[:3])
    return dy - r


def sdf_vertical_half_space(g: GeometryId, p: GeometryPoint) -> float:
    """Vertical half-space {y <= 0} (pre-image of a factor half-plane)."""
    y = float(p.coords[1])
    if g is S2E:
        return math.asin(min(1.0, max(-1.0, y)))
    return math.asinh(y)


def sdf_horizontal_half_space(g: GeometryId, p: GeometryPoint,
                              level: float = 0.0) -> float:
    """Horizontal half-space {w <= level}; exact by factor translation."""
    return float(p.coords[3]) - level


# --- lighting ----------------------------------------------------------------

def lighting_pairs(s: GeometryPoint, q: GeometryPoint, max_pairs: int = 4):
    """Geodesics from s to q: a singleton in H^2 x E, countably many wraps in
    S^2 x E (sorted by length, truncated at max_pairs)."""
    from .lighting import LightingPair
    g = s.geometry
    sy, qy = s.coords[:3], q.coords[:3]
    de = float(q.coords[3] - s.coords[3])
    if g is H2E:
        dy = h2_distance(sy, qy)
        if dy < 1e-12:
            if abs(de) < 1e-12:
                raise DegenerateConfigurationError("light coincides with the point")
            vec = np.array([0.0, 0.0, 0.0, math.copysign(1.0, de)])
            return [LightingPair(vec, abs(de))]
        vy = h2_direction(sy, qy)
        vec = dy * np.array([vy[0], vy[1], vy[2], 0.0]) + np.array([0, 0, 0, de])
        length = math.hypot(dy, de)
        return [LightingPair(vec / length, length)]
    dy = s2_distance(sy, qy)
    if dy > math.pi - 1e-9:
        raise DegenerateConfigurationError("antipodal factor points")
    pairs = []
    if dy < 1e-12:
        if abs(de) < 1e-12:
            raise DegenerateConfigurationError("light coincides with the point")
        pairs.append(LightingPair(np.array([0.0, 0.0, 0.0, math.copysign(1.0, de)]),
                                  abs(de)))
        return pairs[:max_pairs]
    vy = s2_direction(sy, qy)
    vy4 = np.array([vy[0], vy[1], vy[2], 0.0])
    ew = np.array([0.0, 0.0, 0.0, 1.0])
    n = 0
    while len(pairs) < max_pairs + 2 and n <= max_pairs:
        for arc, direction in (((2.0 * math.pi * n + dy), vy4),
                               ((2.0 * math.pi * (n + 1) - dy), -vy4)):
            vec = arc * direction + de * ew
            length = math.hypot(arc, de)
            pairs.append(LightingPair(vec / length, length))
        n += 1
    pairs.sort(key=lambda pr: pr.length)
    return pairs[:max_pairs]


def area_density(g: GeometryId, r: float, beta: float) -> float:
    """Area density at radius r for a direction at angle beta from vertical."""
    sb = math.sin(beta)
    if abs(sb) < SMALL_ANGLE:
        # removable singularity: f(r sb)/sb -> r + O(sb^2)
        x = r * sb
        if g is S2E:
            corr = r - x * x * r / 6.0 + x ** 4 * r / 120.0
        else:
            corr = r + x * x * r / 6.0 + x ** 4 * r / 120.0
        return r * corr
    x = r * sb
    f = math.sin(x) if g is S2E else math.sinh(x)
    return r * f / sb
