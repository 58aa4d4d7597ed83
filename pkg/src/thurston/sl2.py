"""The universal cover of SL(2,R).

The group SL(2,R) is modeled as the quadric {k(q) = -1} in R^4, where
k(q) = -q0^2 - q1^2 + q2^2 + q3^2 and a group element acts on the quadric by
its left-multiplication matrix.  A point of the universal cover is stored
redundantly as the pair (q, w): the quadric point plus the lifted fiber
coordinate, which equals 2*atan2(q1, q0) modulo 4*pi.

Lifted group arithmetic uses the polar decomposition of 2x2 matrices: the
rotation angle of a product of two positive elements lies in (-pi/2, pi/2),
which pins the fiber branch of any product exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import (
    GeometryId,
    GeometryPoint,
    Isometry,
    OriginFlow,
    PreconditionError,
    SolverFailureError,
    TangentVector,
)

SL2 = GeometryId.SL2

TAU = 2.0 * math.pi
AXIS_RHO = 1e-9
FLAT_W = 1e-12
NEWTON_TOL = 1e-12
NEWTON_MAX_ITERS = 50
PARABOLIC_BAND = 1e-14      # |tan(phi)^2 - sinh(rho/2)^2| band for the residual
SERIES_Y = 1e-6             # |D (t/2)^2| switch for the flow helper series
DENSITY_CONE_FRACTION = 1e-2
BALL_ETA_DEFAULT = 0.5

_SERIES_N = 26              # truncation order of the density series in D


class PhaseDomainError(PreconditionError):
    """The phase residual was evaluated in a gap of its domain."""


# --- group plumbing -----------------------------------------------------------

def k_form(q: np.ndarray) -> float:
    return float(-q[0] * q[0] - q[1] * q[1] + q[2] * q[2] + q[3] * q[3])


def left_matrix(q: np.ndarray) -> np.ndarray:
    q0, q1, q2, q3 = q
    return np.array([
        [q0, -q1, q2, q3],
        [q1, q0, q3, -q2],
        [q2, q3, q0, -q1],
        [q3, -q2, q1, q0],
    ])


def group_inverse(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def fiber_mod(q: np.ndarray) -> float:
    """Fiber coordinate modulo 4*pi determined by the quadric point."""
    return 2.0 * math.atan2(q[1], q[0])


def _renorm_quadric(q: np.ndarray) -> np.ndarray:
    return q / math.sqrt(-k_form(q))


def mul_lifted(qh: np.ndarray, wh: float, qg: np.ndarray, wg: float):
    """Lifted group product; the fiber correction is exact (see module doc)."""
    q = _renorm_quadric(left_matrix(qh) @ qg)
    w = wh + wg + math.remainder(fiber_mod(q) - wh - wg, TAU)
    return q, w


def left_isometry(p: GeometryPoint) -> Isometry:
    return Isometry(SL2, left_matrix(p.coords), p.fiber)


def make_isometry(q: np.ndarray, w: float) -> Isometry:
    return Isometry(SL2, left_matrix(np.asarray(q, dtype=float)), w)


def _element(iso: Isometry) -> np.ndarray:
    return iso.matrix[:, 0].copy()


def compose_isometries(a: Isometry, b: Isometry) -> Isometry:
    q, w = mul_lifted(_element(a), a.fiber_shift, _element(b), b.fiber_shift)
    return make_isometry(q, w)


def invert_isometry(a: Isometry) -> Isometry:
    return make_isometry(group_inverse(_element(a)), -a.fiber_shift)


def apply_isometry_point(iso: Isometry, p: GeometryPoint) -> GeometryPoint:
    q, w = mul_lifted(_element(iso), iso.fiber_shift, p.coords, p.fiber)
    return GeometryPoint(SL2, q, w)


def model_residual(p: GeometryPoint) -> float:
    res = abs(k_form(p.coords) + 1.0)
    branch = abs(math.remainder(p.fiber - fiber_mod(p.coords), 2.0 * TAU))
    return res + branch


def renormalize_point(p: GeometryPoint) -> GeometryPoint:
    return GeometryPoint(SL2, _renorm_quadric(p.coords), p.fiber)


def metric_dot(p: GeometryPoint, u: np.ndarray, v: np.ndarray) -> float:
    q = p.coords

    def quad(t: np.ndarray) -> float:
        k = k_form(q)
        b0 = float(q @ q)
        b1 = q[0] * q[2] - q[1] * q[3]
        b2 = q[0] * q[3] + q[1] * q[2]
        return (4.0 / (k * k)) * (
            b0 * float(t @ t)
            - 4.0 * b1 * (t[0] * t[2] - t[1] * t[3])
            - 4.0 * b2 * (t[0] * t[3] + t[1] * t[2]))

    return 0.25 * (quad(u + v) - quad(u - v))


# --- fibration ---------------------------------------------------------------

def h2_point(p: GeometryPoint) -> np.ndarray:
    """Hyperboloid coordinates of the projection to the hyperbolic plane."""
    q = p.coords
    ch2 = q[0] * q[0] + q[1] * q[1]          # cosh^2(rho/2)
    sh2 = q[2] * q[2] + q[3] * q[3]          # sinh^2(rho/2)
    cosh_rho = ch2 + sh2
    sinh_rho = 2.0 * math.sqrt(max(ch2 * sh2, 0.0))
    theta = math.atan2(q[3], q[2]) + math.atan2(q[1], q[0])
    return np.array([sinh_rho * math.cos(theta), sinh_rho * math.sin(theta),
                     cosh_rho])


def horizontal_radius(p: GeometryPoint) -> float:
    q = p.coords
    return 2.0 * math.asinh(math.sqrt(max(q[2] * q[2] + q[3] * q[3], 0.0)))


def klein_coords(p: GeometryPoint):
    h = h2_point(p)
    return h[0] / h[2], h[1] / h[2]


def section_lift(h: np.ndarray) -> np.ndarray:
    """Base section of the fibration over the hyperboloid point h."""
    z1 = h[2] + 1.0
    s = math.sqrt(2.0 * z1)
    return np.array([math.sqrt(z1 / 2.0), 0.0, h[0] / s, h[1] / s])


def spin_matrix(w: float) -> np.ndarray:
    c, s = math.cos(w / 2.0), math.sin(w / 2.0)
    return np.array([
        [c, -s, 0.0, 0.0],
        [s, c, 0.0, 0.0],
        [0.0, 0.0, c, s],
        [0.0, 0.0, -s, c],
    ])


def point_from_h2_fiber(h: np.ndarray, w: float) -> GeometryPoint:
    q = spin_matrix(w) @ section_lift(h)
    return GeometryPoint(SL2, _renorm_quadric(q), w)


def random_point(rng: np.random.Generator, radius: float = 2.0) -> GeometryPoint:
    ang = rng.uniform(0.0, TAU)
    r = rng.uniform(0.0, radius)
    h = np.array([math.sinh(r) * math.cos(ang), math.sinh(r) * math.sin(ang),
                  math.cosh(r)])
    return point_from_h2_fiber(h, rng.uniform(-2.0 * radius, 2.0 * radius))


# --- geodesic flow -----------------------------------------------------------

def _cosq(y: float) -> float:
    """cos(sqrt(y)) for y >= 0, cosh(sqrt(-y)) for y < 0 (analytic in y)."""
    if abs(y) < SERIES_Y:
        return 1.0 - y / 2.0 + y * y / 24.0 - y ** 3 / 720.0
    if y > 0.0:
        return math.cos(math.sqrt(y))
    return math.cosh(math.sqrt(-y))


def _sincq(y: float) -> float:
    """sin(sqrt(y))/sqrt(y), continued through y <= 0."""
    if abs(y) < SERIES_Y:
        return 1.0 - y / 6.0 + y * y / 120.0 - y ** 3 / 5040.0
    if y > 0.0:
        r = math.sqrt(y)
        return math.sin(r) / r
    r = math.sqrt(-y)
    return math.sinh(r) / r


def _rotz3(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rotyz3(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _fiber_phase(a: float, c: float, t: float) -> float:
    """Continuous lift of the spin-compensation angle along the geodesic."""
    D = c * c - a * a
    y = D * (t / 2.0) ** 2
    if y > 0.0625:  # winding possible only deep in the rotational regime
        kappa = math.sqrt(D)
        psi = kappa * t / 2.0
        half_turns = math.floor(psi / math.pi + 0.5)
        base = psi - half_turns * math.pi
        return -(math.atan((c / kappa) * math.tan(base))
                 + half_turns * math.pi * math.copysign(1.0, c))
    cval = _cosq(y)
    sval = (t / 2.0) * _sincq(y)
    return -math.atan2(c * sval, cval)


def flow_origin(g: GeometryId, u3: np.ndarray, t: float,
                want_transport: bool) -> OriginFlow:
    ux, uy, c = float(u3[0]), float(u3[1]), float(u3[2])
    a = math.hypot(ux, uy)
    alpha = math.atan2(uy, ux) if a > 0.0 else 0.0
    D = c * c - a * a
    y = D * (t / 2.0) ** 2
    cval = _cosq(y)
    sval = (t / 2.0) * _sincq(y)
    eta = np.array([cval, -c * sval, a * sval, 0.0])
    xi = np.array([math.cos(c * t), math.sin(c * t), 0.0, 0.0])
    q = left_matrix(eta) @ xi
    rot = np.eye(4)
    ca, sa = math.cos(alpha), math.sin(alpha)
    rot[2, 2] = ca
    rot[2, 3] = -sa
    rot[3, 2] = sa
    rot[3, 3] = ca
    q = _renorm_quadric(rot @ q)
    w = 2.0 * c * t + 2.0 * _fiber_phase(a, c, t)
    end = GeometryPoint(SL2, q, w)
    u_end = np.array([a * math.cos(alpha - 2.0 * c * t),
                      a * math.sin(alpha - 2.0 * c * t), c])
    transport = None
    if want_transport:
        P = np.array([[a, 0.0, -c], [0.0, 1.0, 0.0], [c, 0.0, a]])
        transport = (_rotz3(alpha) @ _rotz3(-2.0 * c * t)
                     @ P @ _rotyz3(t / 2.0) @ P.T @ _rotz3(-alpha))
    return OriginFlow(end, left_isometry(end), u_end, transport)


def advance(v: TangentVector, t: float) -> TangentVector:
    """Marching fast path via the lifted group conjugation."""
    p = v.base
    inv = left_matrix(group_inverse(p.coords))
    d0 = inv @ v.dir
    u0 = np.array([2.0 * d0[2], 2.0 * d0[3], 2.0 * d0[1]])
    of = flow_origin(SL2, u0, t, want_transport=False)
    q, w = mul_lifted(p.coords, p.fiber, of.end.coords, of.end.fiber)
    end = GeometryPoint(SL2, q, w)
    u = of.u_end
    emb = np.array([0.0, 0.5 * u[2], 0.5 * u[0], 0.5 * u[1]])
    return TangentVector(end, left_matrix(q) @ emb)


# --- exact distance and direction --------------------------------------------

def _residual_core(rho: float, phi: float):
    """The fiber travel 2*c*t plus recovery data for turning angle phi.

    Returns (ct, m, kappa, t) where m = c/kappa; raises PhaseDomainError in
    the gaps where no geodesic attains radius rho with this turning angle.
    """
    sigma = math.sinh(rho / 2.0)
    cosh_half = math.cosh(rho / 2.0)
    # split phi = m*pi + r with r in [-pi/2, pi/2] so that the winding count
    # and the tangent value always agree, even next to the poles
    m_half = round(phi / math.pi)
    r = phi - m_half * math.pi
    x = math.tan(r)
    gap = x * x - sigma * sigma
    j = -m_half
    if abs(gap) < PARABOLIC_BAND * max(1.0, sigma * sigma):
        if j > 0:
            # wound parabolic limit: infinitely long geodesics, the residual
            # blows up toward the component edge
            return 1e300, None, None, math.inf
        ct = -2.0 * x
        # m -> +/- infinity; report the parabolic recovery directly
        return ct, None, None, None
    if gap < 0.0:
        if j > 0:
            raise PhaseDomainError(
                f"turning angle {phi} lies in an undefined gap for radius {rho}")
        root = math.sqrt(-gap)
        m = -x * cosh_half / root
        kappa = 1.0 / math.sqrt(1.0 + 2.0 * m * m)
        targ = root / cosh_half
        t = (2.0 / kappa) * math.atanh(targ)
        return 2.0 * m * math.atanh(targ), m, kappa, t
    root = math.sqrt(gap)
    m = abs(x) * cosh_half / root
    kappa = 1.0 / math.sqrt(2.0 * m * m - 1.0)
    psi = j * math.pi + math.atan(-x / m)
    if psi < 0.0:
        raise PhaseDomainError("negative rotational phase")
    t = 2.0 * psi / kappa
    return 2.0 * m * psi, m, kappa, t


def phase_residual(rho: float, w: float, phi: float) -> float:
    """Scalar residual whose zeros enumerate geodesics from the origin to the
    point with cylindrical data (rho > 0, fiber w); phi is the turning angle
    of the projection (non-positive for w >= 0)."""
    if rho <= 0.0:
        raise PreconditionError("phase residual requires rho > 0")
    ct, _, _, _ = _residual_core(rho, phi)
    return -0.5 * w + phi + ct


def _domain_components(rho: float, k_max: int):
    """Maximal intervals of the residual domain, nearest to zero first."""
    sigma = math.sinh(rho / 2.0)
    edge = math.atan(sigma)
    comps = [(-math.pi + edge, 0.0)]
    for k in range(1, k_max + 1):
        comps.append((-(k + 1) * math.pi + edge, -k * math.pi - edge))
    return comps


def _roots_on_component(rho: float, w: float, lo: float, hi: float):
    f = lambda p: phase_residual(rho, w, p)
    pad = 1e-10 * (1.0 + abs(lo))
    # the residual is finite at phi = 0 (the right end of the first component)
    a, b = lo + pad, (0.0 if hi == 0.0 else hi - pad)
    if b <= a:
        return []
    n = 96
    xs = [a + (b - a) * i / (n - 1) for i in range(n)]
    vals = []
    for x in xs:
        try:
            vals.append(f(x))
        except PhaseDomainError:
            vals.append(float("inf"))
    roots = []
    for i in range(n - 1):
        va, vb = vals[i], vals[i + 1]
        if not (math.isfinite(va) and math.isfinite(vb)):
            continue
        if va == 0.0:
            roots.append(xs[i])
            continue
        if va * vb < 0.0:
            roots.append(_bisect_newton(f, xs[i], xs[i + 1], va, vb))
    if math.isfinite(vals[-1]) and vals[-1] == 0.0:
        roots.append(xs[-1])
    return roots


def _bisect_newton(f, lo, hi, flo, fhi):
    """Safeguarded Newton (finite-difference slope) on a sign-change bracket;
    steep roots are accepted by argument accuracy rather than residual size."""
    x = 0.5 * (lo + hi)
    h = 1e-7
    df = 1.0
    for _ in range(NEWTON_MAX_ITERS):
        fx = f(x)
        a, b = max(x - h, lo), min(x + h, hi)
        df = (f(b) - f(a)) / (b - a) if b > a else 1.0
        if abs(fx) < NEWTON_TOL * max(1.0, abs(df)):
            return x
        if (fx > 0.0) == (fhi > 0.0):
            hi = x
        else:
            lo = x
        if hi - lo < 5e-15 * (1.0 + abs(x)):
            return x            # located to float resolution
        xn = x - fx / df if df != 0.0 else 0.5 * (lo + hi)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        x = xn
    if abs(f(x)) < 1e-9 * max(1.0, abs(df)) \
            or hi - lo < 5e-15 * (1.0 + abs(x)):
        return x
    raise SolverFailureError("phase solver did not converge")


def _pair_from_root(rho: float, theta: float, phi: float):
    """Recover (frame direction, length) for the root phi."""
    ct, m, kappa, t = _residual_core(rho, phi)
    if m is None:
        # parabolic: c = a = 1/sqrt(2)
        c = math.copysign(1.0, -phi if phi != 0.0 else 1.0) / math.sqrt(2.0)
        a = 1.0 / math.sqrt(2.0)
        t = ct / c if c != 0.0 else 2.0 * math.sinh(rho / 2.0) * math.sqrt(2.0)
    else:
        c = m * kappa
        a = math.sqrt(max(1.0 - c * c, 0.0))
    base = flow_origin(SL2, np.array([a, 0.0, c]), t, want_transport=False)
    h = h2_point(base.end)
    theta0 = math.atan2(h[1], h[0])
    alpha = theta - theta0
    return np.array([a * math.cos(alpha), a * math.sin(alpha), c]), t


@dataclass
class PhaseRoot:
    phi: float
    direction: np.ndarray       # frame coordinates at the origin
    length: float


def phase_roots(rho: float, w: float) -> list[PhaseRoot]:
    """All zeros of the phase residual for the point (rho, theta=0, w >= 0)."""
    k_max = int(math.ceil(w / TAU)) + 3
    roots = []
    for lo, hi in _domain_components(rho, k_max):
        for phi in _roots_on_component(rho, w, lo, hi):
            v, t = _pair_from_root(rho, 0.0, phi)
            roots.append(PhaseRoot(phi, v, t))
    return roots


def _axis_pairs(w: float, max_pairs: int):
    from .lighting import LightingPair
    pairs = [LightingPair(np.array([0.0, 0.0, 1.0]), w)]
    n = int(math.floor(w / TAU))
    for k in range(1, n + 1):
        tk = TAU * k * math.sqrt(0.5 * (w / (TAU * k) + 1.0) ** 2 - 1.0)
        num = (w + TAU * k) ** 2 - (2.0 * TAU * k) ** 2
        den = 2.0 * (w + TAU * k) ** 2 - (2.0 * TAU * k) ** 2
        v = np.array([math.sqrt(max(num, 0.0) / den), 0.0,
                      (w + TAU * k) / math.sqrt(den)])
        pairs.append(LightingPair(v, tk, family=True))
    return pairs


def lighting_pairs_origin(p: GeometryPoint, max_pairs: int = 3):
    """Geodesics from the origin to p, sorted by length; directions are
    ambient tangent 4-vectors at the origin."""
    from .kernel import tangent_from_frame, origin
    from .lighting import LightingPair
    rho = horizontal_radius(p)
    w = p.fiber
    flip = w < 0.0
    if flip:
        q = p.coords
        p = GeometryPoint(SL2, np.array([q[0], -q[1], q[3], q[2]]), -w)
        w = -w
    if rho < AXIS_RHO and w < FLAT_W:
        raise PreconditionError("no geodesic data for the origin itself")
    if rho < AXIS_RHO:
        frame_pairs = _axis_pairs(w, max_pairs)
    else:
        h = h2_point(p)
        theta = math.atan2(h[1], h[0])
        frame_pairs = []
        if w < FLAT_W:
            frame_pairs.append(
                _mk_pair(np.array([math.cos(theta), math.sin(theta), 0.0]), rho))
        else:
            k_max = int(math.ceil(w / TAU)) + 3
            for lo, hi in _domain_components(rho, k_max):
                for phi in _roots_on_component(rho, w, lo, hi):
                    v, t = _pair_from_root(rho, theta, phi)
                    frame_pairs.append(_mk_pair(v, t))
    frame_pairs.sort(key=lambda pr: pr.length)
    frame_pairs = frame_pairs[:max_pairs]
    o = origin(SL2)
    out = []
    for pr in frame_pairs:
        u3 = pr.direction
        if flip:
            u3 = np.array([u3[1], u3[0], -u3[2]])
        out.append(LightingPair(tangent_from_frame(o, u3), pr.length, pr.family))
    return out


def _mk_pair(u3: np.ndarray, t: float):
    from .lighting import LightingPair
    return LightingPair(u3, t)


def distance_from_origin(p: GeometryPoint) -> float:
    rho = horizontal_radius(p)
    w = abs(p.fiber)
    if rho < AXIS_RHO and w < FLAT_W:
        return 0.0
    if w < 1.8 * math.pi:
        return _distance_first_component(rho, w)
    return lighting_pairs_origin(p, max_pairs=1)[0].length


def _distance_first_component(rho: float, w: float) -> float:
    """Minimizing distance for points below the fiber injectivity radius,
    where the single relevant root lies on the first residual component."""
    if w < FLAT_W:
        return rho
    if rho < AXIS_RHO:
        return w
    sigma = math.sinh(rho / 2.0)
    lo_edge = -math.pi + math.atan(sigma)

    def f(t):
        try:
            return phase_residual(rho, w, t)
        except PhaseDomainError:
            return 1e300        # at the very edge of the component

    hi, fhi = 0.0, -0.5 * w
    step = 0.1
    lo = -step
    flo = None
    while lo > lo_edge:
        val = f(lo)
        if val > 0.0:
            flo = val
            break
        hi, fhi = lo, val
        lo = max(lo - step, lo_edge + 1e-12 * (1.0 + abs(lo_edge)))
        step *= 1.8
    if flo is None:
        lo = lo_edge + 1e-12 * (1.0 + abs(lo_edge))
        flo = f(lo)
    phi = _bisect_newton(f, lo, hi, flo, fhi)
    _, _, _, t = _residual_core(rho, phi)
    if t is None:   # parabolic recovery
        _, t = _pair_from_root(rho, 0.0, phi)
    return t


def lighting_pairs(s: GeometryPoint, q: GeometryPoint, max_pairs: int = 3):
    from .lighting import LightingPair
    left = left_isometry(s)
    rel = left.inverse().apply_point(q)
    pairs = lighting_pairs_origin(rel, max_pairs)
    return [LightingPair(left.matrix @ pr.direction, pr.length, pr.family)
            for pr in pairs]


def distance(p: GeometryPoint, q: GeometryPoint) -> float:
    rel = left_isometry(p).inverse().apply_point(q)
    return distance_from_origin(rel)


# --- signed distance functions ------------------------------------------------

def sdf_vertical(h2_sdf, p: GeometryPoint) -> float:
    """Distance to a vertical object is the hyperbolic-plane distance of the
    projection to the object's footprint."""
    return h2_sdf(h2_point(p))


def sdf_vertical_cylinder(r: float, p: GeometryPoint) -> float:
    return horizontal_radius(p) - r


def sdf_vertical_half_space(p: GeometryPoint) -> float:
    """Pre-image of the hyperbolic half-plane {y <= 0}."""
    return math.asinh(float(h2_point(p)[1]))


def comparison_half_distance(p: GeometryPoint) -> float:
    """Half the product-metric distance from the origin: a certified lower
    bound for the true distance (and at most the true distance)."""
    rho = horizontal_radius(p)
    return 0.5 * math.hypot(rho, p.fiber)


def sdf_ball(r: float, eta: float, p: GeometryPoint) -> float:
    """Distance bound for the ball of radius r at the origin: comparison
    bounds far away or deep inside, the exact solver near the surface."""
    sigma = comparison_half_distance(p)
    if sigma > r + eta:
        return sigma - r
    if 2.0 * sigma < r - eta:
        return 2.0 * sigma - r
    return distance_from_origin(p) - r


# --- lighting intensity --------------------------------------------------------

def _poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[:_SERIES_N]


def _density_series(rho2: float) -> np.ndarray:
    """Coefficients in D = w^2 - rho^2 of sin^2(K/2) * bracket / D^4 for the
    closed-form density below (the first four coefficients of the numerator
    vanish identically on the cone)."""
    n = _SERIES_N

    def poly(*coeffs):
        out = np.zeros(n)
        out[: len(coeffs)] = coeffs
        return out

    c1 = np.array([(-1.0) ** i / math.factorial(2 * i) for i in range(n)])
    ks = np.zeros(n)
    for m in range(n - 1):
        ks[m + 1] = (-1.0) ** m / math.factorial(2 * m + 1)
    sh = -c1 / 2.0
    sh[0] = 0.0                      # (1 - cos sqrt(D)) / 2
    ch = c1 / 2.0
    ch[0] = 1.0                      # (1 + cos sqrt(D)) / 2
    r2 = poly(2.0 * rho2, 1.0)       # rho^2 + w^2 with w^2 = rho^2 + D
    d_poly = poly(0.0, 1.0)
    bracket = (rho2 ** 2 * _poly_mul(d_poly, ch)
               - rho2 * _poly_mul(r2, ks)
               + _poly_mul(_poly_mul(r2, r2), sh))
    num = _poly_mul(sh, bracket)
    return num[4:]                   # numerator vanishes to order D^4


def area_density(rho: float, w: float) -> float:
    """Area density of geodesic spheres in cylindrical tangent coordinates
    (rho, w) = r * (horizontal, vertical) components of the direction.

    With K = sqrt(|w^2 - rho^2|) and the trigonometric functions continued
    through the cone |w| = |rho| (where a series evaluation takes over):

        A^2 = 16 r^4 sin^2(K/2) [rho^4 D cos^2(K/2) - rho^2 r^2 K sin K
                                 + r^4 sin^2(K/2)] / D^4,   D = w^2 - rho^2.
    """
    rho = abs(rho)
    r2 = rho * rho + w * w
    if r2 == 0.0:
        return 0.0
    D = w * w - rho * rho
    r = math.sqrt(r2)
    if abs(abs(rho) - abs(w)) < DENSITY_CONE_FRACTION * r:
        h = _density_series(rho * rho)
        val = 0.0
        for c in h[::-1]:
            val = val * D + c
        return 4.0 * r2 * math.sqrt(max(val, 0.0))
    if D > 0.0:
        kap = math.sqrt(D)
        c1 = math.cos(kap)
        ksin = kap * math.sin(kap)
    else:
        kap = math.sqrt(-D)
        c1 = math.cosh(kap)
        ksin = -kap * math.sinh(kap)
    sh2 = 0.5 * (1.0 - c1)
    ch2 = 0.5 * (1.0 + c1)
    bracket = rho ** 4 * D * ch2 - rho * rho * r2 * ksin + r2 * r2 * sh2
    val = 16.0 * r2 * r2 * sh2 * bracket / D ** 4
    return math.sqrt(max(val, 0.0))


def area_density_direction(u3: np.ndarray, r: float) -> float:
    a = math.hypot(float(u3[0]), float(u3[1]))
    c = float(u3[2])
    return area_density(r * a, r * c)


# --- lattice --------------------------------------------------------------------

OCTAGON_MARGIN = math.sqrt(2.0) * math.sqrt(math.sqrt(2.0) - 1.0)


def genus_two_lattice():
    """Lattice of the unit tangent bundle of a genus-two surface: octagon
    translations with quarter-turn fiber lifts plus the full fiber translation.
    Teleport order: octagon faces first, then the fiber."""
    from .quotient import Halfspace, QuotientStructure

    v = math.sqrt(2.0) / 2.0 + 1.0
    s = math.sqrt(math.sqrt(2.0) + 1.0)
    a1 = np.array([v, -v, -math.sqrt(2.0) * s, 0.0])
    a2 = np.array([v, -v, math.sqrt(2.0) * s, 0.0])
    b1 = np.array([v, v, s, -s])
    b2 = np.array([v, v, -s, s])
    A1 = make_isometry(_renorm_quadric(a1), -math.pi / 2.0)
    A2 = make_isometry(_renorm_quadric(a2), -math.pi / 2.0)
    B1 = make_isometry(_renorm_quadric(b1), math.pi / 2.0)
    B2 = make_isometry(_renorm_quadric(b2), math.pi / 2.0)
    C = make_isometry(np.array([-1.0, 0.0, 0.0, 0.0]), TAU)
    gens = [B1.inverse(), A1, B1, A1.inverse(),
            B2.inverse(), A2, B2, A2.inverse(),
            C.inverse(), C]
    d = OCTAGON_MARGIN
    r = math.sqrt(2.0) / 2.0
    normals = [(1.0, 0.0), (r, r), (0.0, 1.0), (-r, r)]
    halfspaces = []
    for i, (nx, ny) in enumerate(normals):
        halfspaces.append(Halfspace(np.array([nx, ny, 0.0, -d]), i))
        halfspaces.append(Halfspace(np.array([-nx, -ny, 0.0, -d]), i + 4))
    halfspaces.append(Halfspace(np.array([0.0, 0.0, 1.0, -math.pi]), 8))
    halfspaces.append(Halfspace(np.array([0.0, 0.0, -1.0, -math.pi]), 9))
    return QuotientStructure(SL2, gens, halfspaces,
                             phases=[list(range(8)), [8, 9]])
