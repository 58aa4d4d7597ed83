"""Sol geometry in the affine model {w = 1} with metric
e^{-2z} dx^2 + e^{2z} dy^2 + dz^2.

Generic geodesics are exact in terms of Jacobi elliptic functions; a mixed
policy integrates short flows numerically (second-order Runge-Kutta on the
pulled-back direction system) where the elliptic evaluation loses precision,
and falls back to fine fourth-order steps for directions hugging the two
totally geodesic hyperbolic planes.
"""
from __future__ import annotations

import math

import numpy as np

from . import specfun
from .kernel import (
    GeometryError,
    GeometryId,
    GeometryPoint,
    Isometry,
    OriginFlow,
    TangentVector,
)

SOL = GeometryId.SOL

T_SWITCH = 0.1             # below: RK2 stepping, above: exact elliptic flow
RK2_STEP_DIV = 8
RK2_STEP_FLOOR = 1e-3
PLANE_BAND = 1e-3          # min(a,b) below this: fine numeric fallback
EXACT_AB_EPS = 1e-14       # exactly-in-plane threshold for the closed forms
TRANSPORT_STEP = 0.01


def left_isometry(p: GeometryPoint) -> Isometry:
    x, y, z = p.coords[0], p.coords[1], p.coords[2]
    ez = math.exp(z)
    m = np.array([
        [ez, 0.0, 0.0, x],
        [0.0, 1.0 / ez, 0.0, y],
        [0.0, 0.0, 1.0, z],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return Isometry(SOL, m)


def _direction_rhs(u: np.ndarray) -> np.ndarray:
    return np.array([u[0] * u[2], -u[1] * u[2], u[1] * u[1] - u[0] * u[0]])


def _full_rhs(state: np.ndarray) -> np.ndarray:
    x, y, z, ux, uy, uz = state
    ez = math.exp(z)
    return np.array([ez * ux, uy / ez, uz,
                     ux * uz, -uy * uz, uy * uy - ux * ux])


def _transport_rhs(u: np.ndarray, q: np.ndarray) -> np.ndarray:
    b = np.array([[0.0, 0.0, -u[0]],
                  [0.0, 0.0, u[1]],
                  [u[0], -u[1], 0.0]])
    return -b @ q


def _rk2_flow(u0: np.ndarray, t: float, want_transport: bool):
    n = max(1, math.ceil(abs(t) / max(abs(t) / RK2_STEP_DIV, RK2_STEP_FLOOR)))
    dt = t / n
    state = np.array([0.0, 0.0, 0.0, u0[0], u0[1], u0[2]])
    q = np.eye(3)
    for _ in range(n):
        k1 = _full_rhs(state)
        mid = state + 0.5 * dt * k1
        k2 = _full_rhs(mid)
        if want_transport:
            q1 = _transport_rhs(state[3:], q)
            q2 = _transport_rhs(mid[3:], q + 0.5 * dt * q1)
            q = q + dt * q2
        state = state + dt * k2
    return state[:3], state[3:], (q if want_transport else None)


def _rk4_flow(u0: np.ndarray, t: float, dt_target: float, want_transport: bool):
    n = max(1, math.ceil(abs(t) / dt_target))
    dt = t / n
    state = np.array([0.0, 0.0, 0.0, u0[0], u0[1], u0[2]])
    q = np.eye(3)
    for _ in range(n):
        k1 = _full_rhs(state)
        k2 = _full_rhs(state + 0.5 * dt * k1)
        k3 = _full_rhs(state + 0.5 * dt * k2)
        k4 = _full_rhs(state + dt * k3)
        if want_transport:
            q1 = _transport_rhs(state[3:], q)
            q2 = _transport_rhs((state + 0.5 * dt * k1)[3:], q + 0.5 * dt * q1)
            q3 = _transport_rhs((state + 0.5 * dt * k2)[3:], q + 0.5 * dt * q2)
            q4 = _transport_rhs((state + dt * k3)[3:], q + dt * q3)
            q = q + (dt / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return state[:3], state[3:], (q if want_transport else None)


def _transport_along(u_of_t, t: float) -> np.ndarray:
    """Integrate the transport rotation along a known direction path."""
    n = max(1, math.ceil(abs(t) / TRANSPORT_STEP))
    dt = t / n
    q = np.eye(3)
    for i in range(n):
        t0 = i * dt
        q1 = _transport_rhs(u_of_t(t0), q)
        q2 = _transport_rhs(u_of_t(t0 + 0.5 * dt), q + 0.5 * dt * q1)
        q3 = _transport_rhs(u_of_t(t0 + 0.5 * dt), q + 0.5 * dt * q2)
        q4 = _transport_rhs(u_of_t(t0 + dt), q + dt * q3)
        q = q + (dt / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
    # the exact transport is orthogonal; squash integration drift
    from .kernel import gram_schmidt
    return gram_schmidt(q)


def _plane_x_flow(b: float, c: float, t: float):
    """Closed form for directions in the totally geodesic plane {x = 0}."""
    ch, sh, th = math.cosh(t), math.sinh(t), math.tanh(t)
    den = 1.0 + c * th
    pos = np.array([0.0, b * th / den, math.log(ch + c * sh)])
    u = np.array([0.0, b / (ch + c * sh), (c + th) / den])
    return pos, u


def _plane_y_flow(a: float, c: float, t: float):
    ch, sh, th = math.cosh(t), math.sinh(t), math.tanh(t)
    den = 1.0 - c * th
    pos = np.array([a * th / den, 0.0, -math.log(ch - c * sh)])
    u = np.array([a / (ch - c * sh), 0.0, (c - th) / den])
    return pos, u


class _EllipticData:
    """Per-direction elliptic parameters for the generic Sol geodesic."""

    def __init__(self, a: float, b: float, c: float):
        ab = a * b
        self.a, self.b, self.c = a, b, c
        self.k = math.sqrt(max((1.0 - 2.0 * ab) / (1.0 + 2.0 * ab), 0.0))
        self.kp = 2.0 * math.sqrt(ab / (1.0 + 2.0 * ab))
        self.mu = math.sqrt(1.0 + 2.0 * ab)
        norm = math.sqrt(max(1.0 - 2.0 * ab, 1e-300))
        self.alpha0 = specfun.inverse_sn_cn(-c / norm, (a - b) / norm, self.k)
        self.K = specfun.elliptic_K(self.k)
        E = specfun.elliptic_E(self.k)
        self.L = E / (self.kp * self.K) - self.kp / 2.0
        self.sn_a, self.cn_a, _ = specfun.jacobi_sn_cn_dn(self.alpha0, self.k)
        self.zeta_a = specfun.jacobi_zeta(self.alpha0, self.k)

    def position(self, t: float) -> np.ndarray:
        s = self.mu * t + self.alpha0
        sn, cn, dn = specfun.jacobi_sn_cn_dn(s, self.k)
        zeta = specfun.jacobi_zeta(s, self.k)
        common = (zeta - self.zeta_a) / self.kp + (s - self.alpha0) * self.L
        swing = (self.k / self.kp) * (sn - self.sn_a)
        x = math.sqrt(self.b / self.a) * (common + swing)
        y = math.sqrt(self.a / self.b) * (common - swing)
        z = 0.5 * math.log(self.b / self.a) + math.asinh((self.k / self.kp) * cn)
        return np.array([x, y, z])

    def direction(self, t: float) -> np.ndarray:
        s = self.mu * t + self.alpha0
        sn, cn, dn = specfun.jacobi_sn_cn_dn(s, self.k)
        denom = self.k * cn + dn
        root = math.sqrt(self.a * self.b)
        return np.array([root * denom / self.kp, root * self.kp / denom,
                         -self.k * self.mu * sn])


def flow_origin(g: GeometryId, u3: np.ndarray, t: float,
                want_transport: bool) -> OriginFlow:
    a, b, c = float(u3[0]), float(u3[1]), float(u3[2])
    # reduce to a >= 0, b >= 0 with the two reflection symmetries
    flip_x = a < 0.0
    flip_y = b < 0.0
    a, b = abs(a), abs(b)
    pos, u_end, q = _flow_reduced(a, b, c, t, want_transport)
    if flip_x:
        pos = pos * np.array([-1.0, 1.0, 1.0])
        u_end = u_end * np.array([-1.0, 1.0, 1.0])
        if q is not None:
            f = np.diag([-1.0, 1.0, 1.0])
            q = f @ q @ f
    if flip_y:
        pos = pos * np.array([1.0, -1.0, 1.0])
        u_end = u_end * np.array([1.0, -1.0, 1.0])
        if q is not None:
            f = np.diag([1.0, -1.0, 1.0])
            q = f @ q @ f
    end = GeometryPoint(SOL, np.array([pos[0], pos[1], pos[2], 1.0]))
    return OriginFlow(end, left_isometry(end), u_end, q)


def _flow_reduced(a: float, b: float, c: float, t: float, want_transport: bool):
    if a < EXACT_AB_EPS:
        pos, u_end = _plane_x_flow(b, c, t)
        q = _transport_along(lambda s: _plane_x_flow(b, c, s)[1], t) \
            if want_transport else None
        return pos, u_end, q
    if b < EXACT_AB_EPS:
        pos, u_end = _plane_y_flow(a, c, t)
        q = _transport_along(lambda s: _plane_y_flow(a, c, s)[1], t) \
            if want_transport else None
        return pos, u_end, q
    if abs(t) < T_SWITCH:
        return _rk2_flow(np.array([a, b, c]), t, want_transport)
    if min(a, b) < PLANE_BAND:
        return _rk4_flow(np.array([a, b, c]), t, 1e-3, want_transport)
    data = _EllipticData(a, b, c)
    pos = data.position(t)
    u_end = data.direction(t)
    q = _transport_along(data.direction, t) if want_transport else None
    return pos, u_end, q


def advance(v: TangentVector, t: float) -> TangentVector:
    """Marching fast path via conjugation through the group."""
    x, y, z = v.base.coords[0], v.base.coords[1], v.base.coords[2]
    ez = math.exp(z)
    u0 = np.array([v.dir[0] / ez, v.dir[1] * ez, v.dir[2]])
    flip_x = u0[0] < 0.0
    flip_y = u0[1] < 0.0
    pos, u_end, _ = _flow_reduced(abs(u0[0]), abs(u0[1]), u0[2], t, False)
    sx = -1.0 if flip_x else 1.0
    sy = -1.0 if flip_y else 1.0
    qx, qy, qz = sx * pos[0], sy * pos[1], pos[2]
    ex = x + ez * qx
    ey = y + qy / ez
    enz = z + qz
    ee = math.exp(enz)
    end = GeometryPoint(SOL, np.array([ex, ey, enz, 1.0]))
    d = np.array([sx * u_end[0] * ee, sy * u_end[1] / ee, u_end[2], 0.0])
    return TangentVector(end, d)


def distance(p: GeometryPoint, q: GeometryPoint) -> float:
    raise GeometryError("sol has no exact distance solver")


# --- signed distance functions -------------------------------------------------

def sdf_z_half_space(level: float, sign: int, p: GeometryPoint) -> float:
    """Horizontal half-spaces: sign -1 is {z <= level}, +1 is {z >= level}."""
    z = float(p.coords[2])
    return (z - level) if sign < 0 else (level - z)


def sdf_x_half_space(level: float, sign: int, p: GeometryPoint) -> float:
    """Half-spaces bounded by the hyperbolic sheet {x = level}."""
    x, z = float(p.coords[0]), float(p.coords[2])
    v = math.asinh((level - x) * math.exp(-z))
    return v if sign > 0 else -v


def sdf_y_half_space(level: float, sign: int, p: GeometryPoint) -> float:
    y, z = float(p.coords[1]), float(p.coords[2])
    v = math.asinh((level - y) * math.exp(z))
    return v if sign > 0 else -v


def sdf_cylinder_x(r: float, p: GeometryPoint) -> float:
    """Solid cylinder about the x-axis (a one-parameter subgroup orbit)."""
    y, z = float(p.coords[1]), float(p.coords[2])
    return math.acosh(math.cosh(z) + 0.5 * math.exp(z) * y * y) - r


def sdf_cylinder_y(r: float, p: GeometryPoint) -> float:
    x, z = float(p.coords[0]), float(p.coords[2])
    return math.acosh(math.cosh(z) + 0.5 * math.exp(-z) * x * x) - r


def pseudo_distance(p: GeometryPoint) -> float:
    """Coordinate envelope resembling the distance to the origin; its level
    sets render decent pseudo-balls but it is not a certified bound."""
    x, y, z = float(p.coords[0]), float(p.coords[1]), float(p.coords[2])
    return math.sqrt(math.exp(-2.0 * z) * x * x
                     + math.exp(2.0 * z) * y * y + z * z)


def sdf_pseudo_ball(level: float, p: GeometryPoint) -> float:
    return pseudo_distance(p) - level


def sdf_pseudo_cylinder_diag(r: float, sign: int, p: GeometryPoint) -> float:
    """Pseudo-cylinder around the planar diagonal geodesic x = sign * y,
    built by sliding along the subgroup and measuring model coordinates."""
    x, y, z = float(p.coords[0]), float(p.coords[1]), float(p.coords[2])
    xi = (x - sign * y) / math.sqrt(2.0)
    return math.hypot(xi, z) - r


# --- lattice ---------------------------------------------------------------------

def anosov_lattice():
    """Suspension of the torus by the [[2,1],[1,1]] map: two horizontal
    translations along the eigen-directions and a vertical stretch by the
    square of the golden ratio.  Teleport order: vertical first, then
    horizontal."""
    from .quotient import Halfspace, QuotientStructure

    phi = (1.0 + math.sqrt(5.0)) / 2.0
    tau = 2.0 * math.log(phi)

    def gen(x, y, z):
        return left_isometry(GeometryPoint(SOL, np.array([x, y, z, 1.0])))

    a1 = gen(phi / (phi + 2.0), -1.0 / (phi + 2.0), 0.0)
    a2 = gen(1.0 / (phi + 2.0), phi / (phi + 2.0), 0.0)
    bb = gen(0.0, 0.0, tau)
    gens = [a1, a1.inverse(), a2, a2.inverse(), bb, bb.inverse()]
    halfspaces = [
        Halfspace(np.array([0.0, 0.0, 1.0 / tau, -0.5]), 5),   # u3 > 1/2 -> b^-1
        Halfspace(np.array([0.0, 0.0, -1.0 / tau, -0.5]), 4),
        Halfspace(np.array([phi, -1.0, 0.0, -0.5]), 1),        # u1 > 1/2 -> a1^-1
        Halfspace(np.array([-phi, 1.0, 0.0, -0.5]), 0),
        Halfspace(np.array([1.0, phi, 0.0, -0.5]), 3),
        Halfspace(np.array([-1.0, -phi, 0.0, -0.5]), 2),
    ]
    return QuotientStructure(SOL, gens, halfspaces, phases=[[0, 1], [2, 3, 4, 5]])
