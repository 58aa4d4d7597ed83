"""Nil geometry in the rotation-invariant affine model {w = 1}.

The left action of the point [x, y, z, 1] is the shear matrix below; the
metric is ds^2 = dx^2 + dy^2 + (dz - (x dy - y dx)/2)^2.  Geodesics from the
origin spiral around vertical lines; their endpoints are closed form, and the
geodesics joining the origin to a point correspond to the zeros of a scalar
phase residual solved with Newton's method.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import (
    DegenerateConfigurationError,
    GeometryId,
    GeometryPoint,
    Isometry,
    OriginFlow,
    PreconditionError,
    SolverFailureError,
    TangentVector,
    origin,
)

NIL = GeometryId.NIL

SERIES_PHI = 1e-2          # |c t| below this uses the series evaluation
SERIES_Z = 1e-2            # |z| below this uses the series area density
AXIS_RHO = 1e-9
PLANE_Z = 1e-12
NEWTON_TOL = 1e-12
NEWTON_MAX_ITERS = 50

# ball bound constants: weights and exponent of the coordinate envelope
BALL_PSI = 0.5
BALL_EXPONENT = 4


class PhasePoleError(PreconditionError):
    """The phase residual was evaluated at one of its poles."""


def left_isometry(p: GeometryPoint) -> Isometry:
    x, y, z = p.coords[0], p.coords[1], p.coords[2]
    m = np.array([
        [1.0, 0.0, 0.0, x],
        [0.0, 1.0, 0.0, y],
        [-y / 2.0, x / 2.0, 1.0, z],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return Isometry(NIL, m)


def _rotz(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rotx_neg_half(t: float) -> np.ndarray:
    # rotation in the (y, z) plane by angle -t/2
    c, s = math.cos(t / 2.0), math.sin(t / 2.0)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def _sinc(phi: float) -> float:
    if abs(phi) < SERIES_PHI:
        p2 = phi * phi
        return 1.0 - p2 / 6.0 + p2 * p2 / 120.0 - p2 ** 3 / 5040.0
    return math.sin(phi) / phi


def _versine_over_sq(phi: float) -> float:
    """(1 - cos phi) / phi^2."""
    if abs(phi) < SERIES_PHI:
        p2 = phi * phi
        return 0.5 - p2 / 24.0 + p2 * p2 / 720.0 - p2 ** 3 / 40320.0
    return (1.0 - math.cos(phi)) / (phi * phi)


def _cubic_defect(phi: float) -> float:
    """(phi - sin phi) / phi^3."""
    if abs(phi) < SERIES_PHI:
        p2 = phi * phi
        return (1.0 / 6.0 - p2 / 120.0 + p2 * p2 / 5040.0 - p2 ** 3 / 362880.0)
    return (phi - math.sin(phi)) / (phi ** 3)


def flow_origin(g: GeometryId, u3: np.ndarray, t: float,
                want_transport: bool) -> OriginFlow:
    ux, uy, c = float(u3[0]), float(u3[1]), float(u3[2])
    a = math.hypot(ux, uy)
    alpha = math.atan2(uy, ux) if a > 0.0 else 0.0
    phi = c * t
    # endpoint, stable through c -> 0
    s1 = _sinc(phi)
    s2 = _versine_over_sq(phi)
    s3 = _cubic_defect(phi)
    ca, sa = math.cos(alpha), math.sin(alpha)
    px = a * t * (s1 * ca - phi * s2 * sa)
    py = a * t * (s1 * sa + phi * s2 * ca)
    pz = c * t + 0.5 * a * a * t * t * phi * s3
    end = GeometryPoint(NIL, np.array([px, py, pz, 1.0]))
    u_end = np.array([a * math.cos(phi + alpha), a * math.sin(phi + alpha), c])
    transport = None
    if want_transport:
        P = np.array([[a, 0.0, -c], [0.0, 1.0, 0.0], [c, 0.0, a]])
        Q = _rotz(alpha) @ _rotz(c * t) @ P @ _rotx_neg_half(t) @ P.T @ _rotz(-alpha)
        transport = Q
    return OriginFlow(end, left_isometry(end), u_end, transport)


def advance(v: TangentVector, t: float) -> TangentVector:
    """Marching fast path in scalar arithmetic."""
    x, y, z = v.base.coords[0], v.base.coords[1], v.base.coords[2]
    dx, dy, dz = v.dir[0], v.dir[1], v.dir[2]
    # pull the direction back to the origin frame
    ux = dx
    uy = dy
    uz = dz + 0.5 * (y * dx - x * dy)
    a = math.hypot(ux, uy)
    alpha = math.atan2(uy, ux) if a > 0.0 else 0.0
    phi = uz * t
    s1 = _sinc(phi)
    s2 = _versine_over_sq(phi)
    s3 = _cubic_defect(phi)
    ca, sa = math.cos(alpha), math.sin(alpha)
    qx = a * t * (s1 * ca - phi * s2 * sa)
    qy = a * t * (s1 * sa + phi * s2 * ca)
    qz = uz * t + 0.5 * a * a * t * t * phi * s3
    ex = x + qx
    ey = y + qy
    ez = z + qz + 0.5 * (x * qy - y * qx)
    ca2, sa2 = math.cos(phi + alpha), math.sin(phi + alpha)
    wx, wy, wz = a * ca2, a * sa2, uz
    end = GeometryPoint(NIL, np.array([ex, ey, ez, 1.0]))
    d = np.array([wx, wy, wz + 0.5 * (ex * wy - ey * wx), 0.0])
    return TangentVector(end, d)


def ray_position_fn(v: TangentVector):
    """Closure mapping arc length to endpoint coordinates along one ray
    (used by wall-creeping bisections)."""
    x, y, z = float(v.base.coords[0]), float(v.base.coords[1]), float(v.base.coords[2])
    dx, dy, dz = float(v.dir[0]), float(v.dir[1]), float(v.dir[2])
    ux = dx
    uy = dy
    uz = dz + 0.5 * (y * dx - x * dy)
    a = math.hypot(ux, uy)
    alpha = math.atan2(uy, ux) if a > 0.0 else 0.0
    ca, sa = math.cos(alpha), math.sin(alpha)

    def position(t: float):
        phi = uz * t
        s1 = _sinc(phi)
        s2 = _versine_over_sq(phi)
        s3 = _cubic_defect(phi)
        qx = a * t * (s1 * ca - phi * s2 * sa)
        qy = a * t * (s1 * sa + phi * s2 * ca)
        qz = uz * t + 0.5 * a * a * t * t * phi * s3
        return (x + qx, y + qy, z + qz + 0.5 * (x * qy - y * qx))

    return position


# --- distance and direction solver ------------------------------------------

def phase_residual(rho: float, z: float, phi: float) -> float:
    """Scalar residual whose zeros enumerate geodesics from the origin to any
    point at horizontal radius rho and height z; phi is the turning angle of
    the projected geodesic.  Defined away from phi in 2*pi*Z_{>0}; extended by
    continuity at phi = 0."""
    if rho <= 0.0:
        raise PreconditionError("phase residual requires rho > 0")
    if phi != 0.0 and abs(math.sin(phi / 2.0)) < 1e-15:
        raise PhasePoleError(f"phase residual has a pole at phi = {phi}")
    if phi == 0.0:
        return -z
    s = math.sin(phi / 2.0)
    return -z + phi + (rho * rho / (8.0 * s * s)) * (phi - math.sin(phi))


def phase_residual_derivative(rho: float, z: float, phi: float) -> float:
    if phi == 0.0:
        return 1.0 + rho * rho / 12.0
    s = math.sin(phi / 2.0)
    if abs(s) < 1e-15:
        raise PhasePoleError(f"phase residual has a pole at phi = {phi}")
    cot = math.cos(phi / 2.0) / s
    return 1.0 + (rho * rho / 8.0) * (2.0 - (phi - math.sin(phi)) * cot / (s * s))


def _newton_root(f, df, lo: float, hi: float, flo: float, fhi: float) -> float:
    """Safeguarded Newton on a bracket with a sign change.

    Steep roots are accepted once the residual is small relative to the local
    slope (equivalently, once the argument is located to the target accuracy).
    """
    x = 0.5 * (lo + hi)
    for _ in range(NEWTON_MAX_ITERS):
        fx = f(x)
        d = df(x)
        if abs(fx) < NEWTON_TOL * max(1.0, abs(d)):
            return x
        if (fx > 0.0) == (fhi > 0.0):
            hi = x
        else:
            lo = x
        if hi - lo < 5e-15 * (1.0 + abs(x)):
            return x            # located to float resolution
        step = fx / d if d != 0.0 else float("inf")
        xn = x - step
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        x = xn
    if abs(f(x)) < 1e-9 * max(1.0, abs(df(x))) \
            or hi - lo < 5e-15 * (1.0 + abs(x)):
        return x
    raise SolverFailureError("phase solver did not converge")


def _interval_roots(rho: float, z: float, k: int) -> list[float]:
    """Zeros of the phase residual on (2 k pi, 2 k pi + 2 pi)."""
    lo = 2.0 * math.pi * k
    hi = lo + 2.0 * math.pi
    pad = 1e-9 * (1.0 + abs(hi))
    f = lambda p: phase_residual(rho, z, p)
    df = lambda p: phase_residual_derivative(rho, z, p)
    if k == 0:
        # residual rises monotonically from -z to +inf
        if z <= 0.0:
            return []
        a = min(pad, 0.5 * z / (1.0 + rho * rho / 12.0))
        b = hi - pad
        fa = f(a)
        if fa > 0.0:
            return []
        while f(b) < 0.0:
            b = 0.5 * (b + hi)
            if hi - b < 1e-15:
                return []
        return [_newton_root(f, df, a, b, fa, f(b))]
    # strictly convex between consecutive poles: locate the minimum first
    a = lo + pad
    b = hi - pad
    da, db = df(a), df(b)
    if da > 0.0 or db < 0.0:
        return []
    for _ in range(200):
        m = 0.5 * (a + b)
        if df(m) < 0.0:
            a = m
        else:
            b = m
        if b - a < 1e-13 * (1.0 + b):
            break
    m = 0.5 * (a + b)
    fm = f(m)
    if fm >= 0.0:
        return []
    lo_edge = lo + pad
    hi_edge = hi - pad
    while f(lo_edge) < 0.0:
        lo_edge = 0.5 * (lo_edge + lo)
    while f(hi_edge) < 0.0:
        hi_edge = 0.5 * (hi_edge + hi)
    r1 = _newton_root(f, df, lo_edge, m, f(lo_edge), fm)
    r2 = _newton_root(f, df, m, hi_edge, fm, f(hi_edge))
    return [r1, r2]


def _pair_from_root(x: float, y: float, z: float, rho: float, phi: float):
    """Recover (direction, length) of the geodesic with turning angle phi."""
    s_half = math.sin(phi / 2.0)
    ratio = rho / (2.0 * abs(s_half))
    c = 1.0 / math.sqrt(1.0 + ratio * ratio)
    a = ratio * c
    t = phi / c
    alpha = math.atan2(y, x) - phi / 2.0
    if s_half < 0.0:
        alpha -= math.pi
    return np.array([a * math.cos(alpha), a * math.sin(alpha), c, 0.0]), t


@dataclass
class PhaseRoot:
    """One zero of the phase residual with its recovered geodesic data."""

    phi: float
    direction: np.ndarray
    length: float


def phase_roots(rho: float, z: float) -> list[PhaseRoot]:
    """All zeros of the phase residual for a point at (rho, theta=0, z>0)."""
    roots = []
    k = 0
    while 2.0 * math.pi * k <= z:
        for phi in _interval_roots(rho, z, k):
            v, t = _pair_from_root(rho, 0.0, z, rho, phi)
            roots.append(PhaseRoot(phi, v, t))
        k += 1
    return roots


def lighting_pairs_origin(p: GeometryPoint, max_pairs: int = 3):
    """Geodesics from the origin to p, sorted by length.

    On the vertical axis the one-parameter families of equal-length geodesics
    are reported once (at angle 0) with the family flag set.
    """
    from .lighting import LightingPair
    x, y, z = float(p.coords[0]), float(p.coords[1]), float(p.coords[2])
    flip = z < 0.0
    if flip:
        x, y, z = y, x, -z
    rho = math.hypot(x, y)
    if rho < AXIS_RHO and z < PLANE_Z:
        raise PreconditionError("no geodesic data for the origin itself")
    pairs = []
    if rho < AXIS_RHO:
        pairs.append(LightingPair(np.array([0.0, 0.0, 1.0, 0.0]), z))
        n = int(math.floor(z / (2.0 * math.pi)))
        for k in range(1, n + 1):
            t_k = 2.0 * k * math.pi * math.sqrt(z / (k * math.pi) - 1.0)
            v = np.array([
                math.sqrt((z - 2.0 * k * math.pi) / (z - k * math.pi)),
                0.0,
                math.sqrt(k * math.pi / (z - k * math.pi)),
                0.0,
            ])
            pairs.append(LightingPair(v, t_k, family=True))
    elif z < PLANE_Z:
        pairs.append(LightingPair(np.array([x / rho, y / rho, 0.0, 0.0]), rho))
    else:
        k = 0
        while True:
            if 2.0 * math.pi * k > z:
                break
            for phi in _interval_roots(rho, z, k):
                v, t = _pair_from_root(x, y, z, rho, phi)
                pairs.append(LightingPair(v, t))
            k += 1
    pairs.sort(key=lambda pr: pr.length)
    pairs = pairs[:max_pairs]
    if flip:
        flipped = []
        for pr in pairs:
            d = pr.direction
            flipped.append(LightingPair(np.array([d[1], d[0], -d[2], 0.0]),
                                        pr.length, pr.family))
        pairs = flipped
    return pairs


def distance_from_origin(p: GeometryPoint) -> float:
    c = p.coords
    return distance_fast(float(c[0]), float(c[1]), float(c[2]))


def distance_fast(x: float, y: float, z: float) -> float:
    """Scalar distance to the origin (the minimizing geodesic only)."""
    z = abs(z)
    rho = math.hypot(x, y)
    if rho < AXIS_RHO:
        if z < PLANE_Z:
            return 0.0
        best = z
        n = int(z / (2.0 * math.pi))
        for k in range(1, n + 1):
            best = min(best, 2.0 * k * math.pi
                       * math.sqrt(z / (k * math.pi) - 1.0))
        return best
    if z < PLANE_Z:
        return rho
    # unique root of the phase residual between 0 and the first pole
    rr = rho * rho
    lo = min(1e-9, 0.5 * z / (1.0 + rr / 12.0))
    hi = 2.0 * math.pi - 1e-9 * 7.0
    f_hi = phase_residual(rho, z, hi)
    while f_hi < 0.0:
        hi = 0.5 * (hi + 2.0 * math.pi)
        f_hi = phase_residual(rho, z, hi)
    phi = _newton_root(lambda t: phase_residual(rho, z, t),
                       lambda t: phase_residual_derivative(rho, z, t),
                       lo, hi, -z, f_hi)
    s_half = math.sin(phi / 2.0)
    ratio = rho / (2.0 * abs(s_half))
    return phi * math.sqrt(1.0 + ratio * ratio)


def lighting_pairs(s: GeometryPoint, q: GeometryPoint, max_pairs: int = 3):
    from .lighting import LightingPair
    rel = left_isometry(s).inverse().apply_point(q)
    pairs = lighting_pairs_origin(rel, max_pairs)
    lin = left_isometry(s).matrix
    return [LightingPair(lin @ pr.direction, pr.length, pr.family) for pr in pairs]


def distance(p: GeometryPoint, q: GeometryPoint) -> float:
    rel = left_isometry(p).inverse().apply_point(q)
    return distance_from_origin(rel)


# --- signed distance functions ----------------------------------------------

def sdf_vertical(planar_sdf, p: GeometryPoint) -> float:
    """Distance to a vertical object equals the planar distance of the
    horizontal projection to the object's footprint."""
    return planar_sdf(float(p.coords[0]), float(p.coords[1]))


def sdf_vertical_cylinder(r: float, p: GeometryPoint) -> float:
    return math.hypot(float(p.coords[0]), float(p.coords[1])) - r


def sdf_vertical_half_space(p: GeometryPoint) -> float:
    """Vertical half-space {x <= 0}."""
    return float(p.coords[0])


def _height_envelope(d: float) -> float:
    """Upper bound for |z| over the ball of radius d about the origin."""
    if d < math.sqrt(6.0):
        return d
    if d < 2.0 * math.sqrt(6.0):
        return (4.0 / 3.0) * (1.0 + d * d / 12.0) ** 1.5
    return d * d / (2.0 * math.sqrt(3.0))


def _height_envelope_inverse(y: float) -> float:
    if y < math.sqrt(6.0):
        return y
    if y < 4.0 * math.sqrt(3.0):
        return math.sqrt(12.0 * ((0.75 * y) ** (2.0 / 3.0) - 1.0))
    return math.sqrt(2.0 * math.sqrt(3.0) * y)


def ball_bound(p: GeometryPoint) -> float:
    """A lower bound for the distance from the origin, cheap to evaluate."""
    return ball_bound_scalar(float(p.coords[0]), float(p.coords[1]),
                             float(p.coords[2]))


def ball_bound_scalar(x: float, y: float, z: float) -> float:
    rho2 = x * x + y * y
    fz = _height_envelope_inverse(abs(z))
    m = BALL_EXPONENT
    return ((1.0 - BALL_PSI) * rho2 ** (m / 2.0)
            + BALL_PSI * fz ** m) ** (1.0 / m)


def sdf_ball(r: float, eta: float, p: GeometryPoint) -> float:
    """Distance bound for a ball of radius r centered at the origin: the cheap
    envelope far away, the exact solver near the surface."""
    return sdf_ball_scalar(r, eta, float(p.coords[0]), float(p.coords[1]),
                           float(p.coords[2]))


def sdf_ball_scalar(r: float, eta: float, x: float, y: float, z: float) -> float:
    sigma = ball_bound_scalar(x, y, z)
    if sigma > r + eta:
        return sigma - r
    return distance_fast(x, y, z) - r


# --- lighting intensity -------------------------------------------------------

def area_density(L: float, z: float) -> float:
    """Area density of geodesic spheres in cylindrical tangent coordinates
    (L, z) = (r sin, r cos of the vertical angle); series near z = 0."""
    r2 = L * L + z * z
    if abs(z) >= SERIES_Z:
        return (2.0 * r2 / z ** 4) * abs(math.sin(z / 2.0)) * \
            abs(L * L * z * math.cos(z / 2.0) - 2.0 * r2 * math.sin(z / 2.0))
    z2 = z * z
    L2 = L * L
    sin_over = 0.5 - z2 / 48.0 + z2 * z2 / 3840.0
    t_over = (-(1.0 + L2 / 12.0) + z2 * (1.0 / 24.0 + L2 / 480.0)
              - z2 * z2 * (1.0 / 1920.0 + L2 / 53760.0))
    return 2.0 * r2 * abs(sin_over * t_over)


def area_density_direction(u3: np.ndarray, r: float) -> float:
    """Density for the unit frame direction u3 after flowing distance r."""
    a = math.hypot(float(u3[0]), float(u3[1]))
    c = float(u3[2])
    return area_density(r * a, r * c)


# --- lattice ------------------------------------------------------------------

def heisenberg_lattice():
    """Integer Heisenberg lattice: unit translations along x, y and the
    central direction, with the unit cube as fundamental domain.  Teleport
    order: horizontal faces first, then the central direction."""
    from .quotient import Halfspace, QuotientStructure

    def gen(x, y, z):
        return left_isometry(GeometryPoint(NIL, np.array([x, y, z, 1.0])))

    gens = [gen(1.0, 0.0, 0.0), gen(-1.0, 0.0, 0.0),
            gen(0.0, 1.0, 0.0), gen(0.0, -1.0, 0.0),
            gen(0.0, 0.0, 1.0), gen(0.0, 0.0, -1.0)]
    halfspaces = [
        Halfspace(np.array([1.0, 0.0, 0.0, -0.5]), 1),   # x > 1/2  -> A^-1
        Halfspace(np.array([-1.0, 0.0, 0.0, -0.5]), 0),  # x < -1/2 -> A
        Halfspace(np.array([0.0, 1.0, 0.0, -0.5]), 3),
        Halfspace(np.array([0.0, -1.0, 0.0, -0.5]), 2),
        Halfspace(np.array([0.0, 0.0, 1.0, -0.5]), 5),
        Halfspace(np.array([0.0, 0.0, -1.0, -0.5]), 4),
    ]
    return QuotientStructure(NIL, gens, halfspaces, phases=[[0, 1, 2, 3], [4, 5]])
