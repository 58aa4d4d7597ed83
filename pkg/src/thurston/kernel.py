"""Geometry-independent core: points, tangents, isometries, poses, and the
dispatch layer that routes flows and metric evaluations to the per-geometry
modules.

All eight model spaces live in (subsets of) R^4.  A point is a 4-vector in
the model set; the universal cover of SL(2,R) additionally carries a real
fiber coordinate.  Unit tangent vectors at the origin are written in a fixed
orthonormal reference frame, so facing matrices and transport rotations are
plain 3x3 orthogonal matrices everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

TAU = 2.0 * math.pi

MODEL_TOL = 1e-6       # membership threshold before raising
UNIT_TOL = 1e-6        # tangent norm tolerance for flow preconditions
RENORM_FLOW_LENGTH = 1.0   # flows longer than this get endpoint re-projection


class GeometryError(Exception):
    """Base class for geometric errors."""


class InvalidPointError(GeometryError):
    """A coordinate vector is not on the model set."""


class PreconditionError(GeometryError):
    """An operation was called outside its contract (e.g. non-unit tangent)."""


class DegenerateConfigurationError(GeometryError):
    """A configuration with no generic answer (e.g. antipodal lighting)."""


class SolverFailureError(GeometryError):
    """A numerical solver did not converge."""


class TeleportDivergenceError(GeometryError):
    """Teleportation failed to reach the fundamental domain."""


class GeometryId(Enum):
    E3 = "e3"
    S3 = "s3"
    H3 = "h3"
    S2E = "s2e"
    H2E = "h2e"
    NIL = "nil"
    SL2 = "sl2"
    SOL = "sol"

    @classmethod
    def parse(cls, name: str) -> "GeometryId":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown geometry id {name!r}") from None


# Geometries whose geodesics are orbits of one-parameter isometry subgroups.
ORBIT_GEOMETRIES = frozenset(
    {GeometryId.E3, GeometryId.S3, GeometryId.H3, GeometryId.S2E, GeometryId.H2E}
)


@dataclass(eq=False)
class GeometryPoint:
    geometry: GeometryId
    coords: np.ndarray          # shape (4,)
    fiber: float = 0.0          # SL2 only: lifted fiber coordinate

    def copy(self) -> "GeometryPoint":
        return GeometryPoint(self.geometry, self.coords.copy(), self.fiber)


@dataclass(eq=False)
class TangentVector:
    base: GeometryPoint
    dir: np.ndarray             # shape (4,), tangent to the model at base

    @property
    def geometry(self) -> GeometryId:
        return self.base.geometry


@dataclass(eq=False)
class Isometry:
    """A model isometry: a 4x4 matrix plus, where needed, a fiber shift.

    For the product geometries the fiber shift is the additive translation of
    the last coordinate.  For SL2 the matrix is the left-multiplication matrix
    of a group element and ``fiber_shift`` is the lifted fiber coordinate of
    that element; only left translations are representable, which is all the
    lattices and scene placements require.
    """

    geometry: GeometryId
    matrix: np.ndarray          # shape (4, 4)
    fiber_shift: float = 0.0

    def compose(self, other: "Isometry") -> "Isometry":
        if self.geometry is not other.geometry:
            raise PreconditionError("cannot compose isometries of different geometries")
        g = self.geometry
        if g is GeometryId.SL2:
            from . import sl2
            return sl2.compose_isometries(self, other)
        m = self.matrix @ other.matrix
        return Isometry(g, m, self.fiber_shift + other.fiber_shift)

    def inverse(self) -> "Isometry":
        g = self.geometry
        if g is GeometryId.SL2:
            from . import sl2
            return sl2.invert_isometry(self)
        return Isometry(g, np.linalg.inv(self.matrix), -self.fiber_shift)

    def apply_point(self, p: GeometryPoint) -> GeometryPoint:
        g = self.geometry
        if g is GeometryId.SL2:
            from . import sl2
            return sl2.apply_isometry_point(self, p)
        coords = self.matrix @ p.coords
        if g in (GeometryId.S2E, GeometryId.H2E):
            coords[3] += self.fiber_shift
        return renormalize(GeometryPoint(g, coords))

    def apply_tangent(self, v: TangentVector) -> TangentVector:
        base = self.apply_point(v.base)
        return TangentVector(base, self.matrix @ v.dir)


def identity_isometry(g: GeometryId) -> Isometry:
    return Isometry(g, np.eye(4))


@dataclass(eq=False)
class Pose:
    """Position-and-facing pair: an isometry g placing the observer at g.o and
    an orthogonal matrix m mapping the reference frame to the facing frame."""

    geometry: GeometryId
    g: Isometry
    m: np.ndarray               # shape (3, 3)

    def position(self) -> GeometryPoint:
        return self.g.apply_point(origin(self.geometry))

    def copy(self) -> "Pose":
        return Pose(self.geometry, Isometry(self.geometry, self.g.matrix.copy(),
                                            self.g.fiber_shift), self.m.copy())


@dataclass(eq=False)
class FlowResult:
    end: GeometryPoint
    tangent: TangentVector
    transport: np.ndarray | None       # 3x3 rotation in the reference frame
    end_isometry: Isometry | None = None


_MODULE_TABLE: dict = {}


def _module(g: GeometryId):
    if not _MODULE_TABLE:
        from . import isotropic, nil, product, sl2, sol
        for gid in (GeometryId.E3, GeometryId.S3, GeometryId.H3):
            _MODULE_TABLE[gid] = isotropic
        for gid in (GeometryId.S2E, GeometryId.H2E):
            _MODULE_TABLE[gid] = product
        _MODULE_TABLE[GeometryId.NIL] = nil
        _MODULE_TABLE[GeometryId.SL2] = sl2
        _MODULE_TABLE[GeometryId.SOL] = sol
    return _MODULE_TABLE[g]


def origin(g: GeometryId) -> GeometryPoint:
    if g in (GeometryId.E3, GeometryId.NIL, GeometryId.SOL):
        return GeometryPoint(g, np.array([0.0, 0.0, 0.0, 1.0]))
    if g in (GeometryId.S3, GeometryId.H3):
        return GeometryPoint(g, np.array([0.0, 0.0, 0.0, 1.0]))
    if g in (GeometryId.S2E, GeometryId.H2E):
        return GeometryPoint(g, np.array([0.0, 0.0, 1.0, 0.0]))
    # SL2: identity element of the group, fiber 0
    return GeometryPoint(g, np.array([1.0, 0.0, 0.0, 0.0]), 0.0)


def reference_frame(g: GeometryId) -> np.ndarray:
    """Columns are the reference-frame vectors at the origin, as 4-vectors."""
    if g in (GeometryId.E3, GeometryId.NIL, GeometryId.SOL, GeometryId.S3, GeometryId.H3):
        f = np.zeros((4, 3))
        f[0, 0] = f[1, 1] = f[2, 2] = 1.0
        return f
    if g in (GeometryId.S2E, GeometryId.H2E):
        f = np.zeros((4, 3))
        f[0, 0] = f[1, 1] = f[3, 2] = 1.0
        return f
    # SL2: vectors whose projections are the H2 axes plus the fiber direction,
    # normalized against the group metric.
    f = np.zeros((4, 3))
    f[2, 0] = 0.5
    f[3, 1] = 0.5
    f[1, 2] = 0.5
    return f


def model_residual(p: GeometryPoint) -> float:
    """How far the coordinates are from the model set (0 when on it)."""
    g = p.geometry
    c = p.coords
    if g in (GeometryId.E3, GeometryId.NIL, GeometryId.SOL):
        return abs(c[3] - 1.0)
    if g is GeometryId.S3:
        return abs(float(c @ c) - 1.0)
    if g is GeometryId.H3:
        q = c[0] ** 2 + c[1] ** 2 + c[2] ** 2 - c[3] ** 2
        return abs(q + 1.0) + (0.0 if c[3] > 0 else 1.0)
    if g is GeometryId.S2E:
        return abs(float(c[:3] @ c[:3]) - 1.0)
    if g is GeometryId.H2E:
        q = c[0] ** 2 + c[1] ** 2 - c[2] ** 2
        return abs(q + 1.0) + (0.0 if c[2] > 0 else 1.0)
    from . import sl2
    return sl2.model_residual(p)


def check_point(p: GeometryPoint, tol: float = MODEL_TOL) -> None:
    if model_residual(p) > tol:
        raise InvalidPointError(
            f"coordinates {p.coords.tolist()} are not on the {p.geometry.value} model set")


def renormalize(p: GeometryPoint) -> GeometryPoint:
    """Project coordinates back onto the model set (drift repair)."""
    g = p.geometry
    c = p.coords
    if g in (GeometryId.E3, GeometryId.NIL, GeometryId.SOL):
        if c[3] == 1.0:
            return p
        return GeometryPoint(g, c / c[3], p.fiber)
    if g is GeometryId.S3:
        return GeometryPoint(g, c / math.sqrt(float(c @ c)))
    if g is GeometryId.H3:
        q = -(c[0] ** 2 + c[1] ** 2 + c[2] ** 2 - c[3] ** 2)
        return GeometryPoint(g, c / math.sqrt(q))
    if g is GeometryId.S2E:
        y = c[:3] / math.sqrt(float(c[:3] @ c[:3]))
        return GeometryPoint(g, np.array([y[0], y[1], y[2], c[3]]))
    if g is GeometryId.H2E:
        q = -(c[0] ** 2 + c[1] ** 2 - c[2] ** 2)
        y = c[:3] / math.sqrt(q)
        return GeometryPoint(g, np.array([y[0], y[1], y[2], c[3]]))
    from . import sl2
    return sl2.renormalize_point(p)


def metric_dot(p: GeometryPoint, u: np.ndarray, v: np.ndarray) -> float:
    """Riemannian inner product of two tangent vectors at p."""
    check_point(p)
    g = p.geometry
    if g is GeometryId.E3:
        return float(u[:3] @ v[:3])
    if g is GeometryId.S3:
        return float(u @ v)
    if g is GeometryId.H3:
        return float(u[0] * v[0] + u[1] * v[1] + u[2] * v[2] - u[3] * v[3])
    if g is GeometryId.S2E:
        return float(u[:3] @ v[:3] + u[3] * v[3])
    if g is GeometryId.H2E:
        return float(u[0] * v[0] + u[1] * v[1] - u[2] * v[2] + u[3] * v[3])
    if g is GeometryId.NIL:
        x, y = p.coords[0], p.coords[1]
        tu = u[2] - 0.5 * (x * u[1] - y * u[0])
        tv = v[2] - 0.5 * (x * v[1] - y * v[0])
        return float(u[0] * v[0] + u[1] * v[1] + tu * tv)
    if g is GeometryId.SOL:
        z = p.coords[2]
        return float(math.exp(-2.0 * z) * u[0] * v[0]
                     + math.exp(2.0 * z) * u[1] * v[1] + u[2] * v[2])
    from . import sl2
    return sl2.metric_dot(p, u, v)


def metric_norm(v: TangentVector) -> float:
    return math.sqrt(max(metric_dot(v.base, v.dir, v.dir), 0.0))


def normalize_tangent(v: TangentVector) -> TangentVector:
    n = metric_norm(v)
    if n == 0.0:
        raise PreconditionError("cannot normalize a zero tangent vector")
    return TangentVector(v.base, v.dir / n)


def tangent_project(p: GeometryPoint, vec: np.ndarray) -> np.ndarray:
    """Project an ambient 4-vector onto the tangent space at p."""
    g = p.geometry
    c = p.coords
    v = np.array(vec, dtype=float)
    if g in (GeometryId.E3, GeometryId.NIL, GeometryId.SOL):
        v[3] = 0.0
        return v
    if g is GeometryId.S3:
        return v - float(v @ c) * c
    if g is GeometryId.H3:
        mink = v[0] * c[0] + v[1] * c[1] + v[2] * c[2] - v[3] * c[3]
        return v + mink * c      # <c,c> = -1
    if g is GeometryId.S2E:
        y = v[:3] - float(v[:3] @ c[:3]) * c[:3]
        return np.array([y[0], y[1], y[2], v[3]])
    if g is GeometryId.H2E:
        mink = v[0] * c[0] + v[1] * c[1] - v[2] * c[2]
        y = v[:3] + mink * c[:3]
        return np.array([y[0], y[1], y[2], v[3]])
    # SL2: tangent to the quadric k(q) = -1
    b = (-v[0] * c[0] - v[1] * c[1] + v[2] * c[2] + v[3] * c[3])
    return v + b * c             # k(c,c) = -1


def tangent_from_frame(p: GeometryPoint, u3: np.ndarray) -> np.ndarray:
    """Reference-frame coordinates at the origin -> ambient tangent 4-vector."""
    return reference_frame(p.geometry) @ np.asarray(u3, dtype=float)


def frame_coordinates(g: GeometryId, dir4: np.ndarray) -> np.ndarray:
    """Ambient tangent 4-vector at the origin -> reference-frame coordinates."""
    if g is GeometryId.SL2:
        # frame vectors have metric norm 1 but euclidean norm 1/2
        return np.array([2.0 * dir4[2], 2.0 * dir4[3], 2.0 * dir4[1]])
    f = reference_frame(g)
    return f.T @ dir4


def gram_schmidt(m: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt re-orthonormalization of a 3x3 matrix (columns)."""
    q = np.array(m, dtype=float)
    for i in range(3):
        for j in range(i):
            q[:, i] -= (q[:, j] @ q[:, i]) * q[:, j]
        q[:, i] /= math.sqrt(q[:, i] @ q[:, i])
    return q


@dataclass(eq=False)
class OriginFlow:
    """Flow data for a geodesic launched from the origin."""

    end: GeometryPoint
    iso: Isometry              # maps origin to end; see per-geometry notes
    u_end: np.ndarray          # endpoint tangent in reference-frame coordinates
    transport: np.ndarray | None


def flow_origin(g: GeometryId, u3: np.ndarray, t: float,
                want_transport: bool = True) -> OriginFlow:
    """Arc-length geodesic flow from the origin in frame direction u3 (unit)."""
    return _module(g).flow_origin(g, np.asarray(u3, dtype=float), float(t),
                                  want_transport)


def flow(v: TangentVector, t: float, want_transport: bool = False) -> FlowResult:
    """Flow a unit tangent vector for distance t.

    Returns the endpoint, the transported tangent there, and (on request) the
    transport rotation expressed in the reference frame.
    """
    g = v.geometry
    if not math.isfinite(t):
        raise PreconditionError("flow time must be finite")
    n = metric_norm(v)
    if abs(n - 1.0) > UNIT_TOL:
        raise PreconditionError(f"flow requires a unit tangent (norm {n})")
    if t == 0.0:
        res = FlowResult(v.base, v, np.eye(3) if want_transport else None,
                         identity_isometry(g))
        return res
    mod = _module(g)
    if g in ORBIT_GEOMETRIES:
        out = mod.flow_at(v, t, want_transport)
    else:
        # conjugate through the transitive group: pull back to the origin
        left = mod.left_isometry(v.base)
        u0 = frame_coordinates(g, left.inverse().matrix @ v.dir)
        of = mod.flow_origin(g, u0, t, want_transport)
        end = left.apply_point(of.end)
        dir4 = left.matrix @ (of.iso.matrix @ tangent_from_frame(origin(g), of.u_end))
        out = FlowResult(end, TangentVector(end, dir4), of.transport,
                         left.compose(of.iso))
    if abs(t) > RENORM_FLOW_LENGTH:
        end = renormalize(out.end)
        out = FlowResult(end, TangentVector(end, tangent_project(end, out.tangent.dir)),
                         out.transport, out.end_isometry)
    return out


def advance(v: TangentVector, t: float) -> TangentVector:
    """Trusted fast path for marching: flow a unit tangent by t, skipping the
    precondition checks, transport, and isometry bookkeeping of flow()."""
    g = v.geometry
    mod = _module(g)
    fast = getattr(mod, "advance", None)
    if fast is not None:
        return fast(v, t)
    return flow(v, t, want_transport=False).tangent


def identity_pose(g: GeometryId) -> Pose:
    return Pose(g, identity_isometry(g), np.eye(3))


def apply_move(pose: Pose, dv: np.ndarray) -> Pose:
    """Move a pose by a displacement given in its local facing frame.

    The pose flows along the geodesic with initial tangent sum(dv_i * f_i) for
    distance |dv|; the facing is updated by parallel transport and then
    re-orthonormalized.
    """
    dv = np.asarray(dv, dtype=float)
    t = math.sqrt(float(dv @ dv))
    if t == 0.0:
        return pose
    u0 = pose.m @ (dv / t)
    of = flow_origin(pose.geometry, u0, t, want_transport=True)
    m = gram_schmidt(of.transport @ pose.m)
    return Pose(pose.geometry, pose.g.compose(of.iso), m)


def rotate_pose(pose: Pose, yaw: float = 0.0, pitch: float = 0.0,
                roll: float = 0.0) -> Pose:
    """Rotate the facing in its own frame: yaw about f2, pitch about f1,
    roll about f3.  Positive yaw turns the view toward +f1."""
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rp = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    rr = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    m = gram_schmidt(pose.m @ (ry @ rp @ rr))
    return Pose(pose.geometry, pose.g, m)


# --- sampling helpers (deterministic given the caller's rng) ---------------

def random_point(g: GeometryId, rng: np.random.Generator,
                 radius: float = 2.0) -> GeometryPoint:
    if g in (GeometryId.E3, GeometryId.NIL, GeometryId.SOL):
        c = rng.uniform(-radius, radius, size=3)
        return GeometryPoint(g, np.array([c[0], c[1], c[2], 1.0]))
    if g is GeometryId.S3:
        v = rng.normal(size=4)
        return renormalize(GeometryPoint(g, v))
    if g is GeometryId.H3:
        d = rng.normal(size=3)
        d /= math.sqrt(d @ d)
        r = rng.uniform(0, radius)
        c = np.array([math.sinh(r) * d[0], math.sinh(r) * d[1],
                      math.sinh(r) * d[2], math.cosh(r)])
        return GeometryPoint(g, c)
    if g is GeometryId.S2E:
        v = rng.normal(size=3)
        v /= math.sqrt(v @ v)
        return GeometryPoint(g, np.array([v[0], v[1], v[2],
                                          rng.uniform(-radius, radius)]))
    if g is GeometryId.H2E:
        ang = rng.uniform(0, TAU)
        r = rng.uniform(0, radius)
        c = np.array([math.sinh(r) * math.cos(ang), math.sinh(r) * math.sin(ang),
                      math.cosh(r), rng.uniform(-radius, radius)])
        return GeometryPoint(g, c)
    from . import sl2
    return sl2.random_point(rng, radius)


def random_unit_tangent(p: GeometryPoint, rng: np.random.Generator) -> TangentVector:
    while True:
        v = tangent_project(p, rng.normal(size=4))
        tv = TangentVector(p, v)
        n = metric_norm(tv)
        if n > 1e-8:
            return TangentVector(p, v / n)


def random_unit_frame_dir(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        n = math.sqrt(v @ v)
        if n > 1e-8:
            return v / n


def distance(p: GeometryPoint, q: GeometryPoint) -> float:
    """Geometry distance between two points (exact solvers for Nil and SL2;
    not provided for Sol)."""
    g = p.geometry
    mod = _module(g)
    return mod.distance(p, q)
