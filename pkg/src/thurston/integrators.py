"""Fixed-step geodesic integrators on the pulled-back direction systems, and
the accuracy benchmark comparing them against the exact flows.

The benchmark draws unit directions at the origin (splitmix64-seeded
Box-Muller, so runs are reproducible everywhere), flows them numerically and
exactly, and reports distance errors (measured in the geometry) and angle
errors (the angle to the nearest exact initial direction reaching the
numerical endpoint).  Samples whose recovered direction lands on a different
geodesic branch are counted as exceptional and excluded from the statistics.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import nil, sl2
from .kernel import (
    GeometryId,
    GeometryPoint,
    PreconditionError,
    flow_origin,
    frame_coordinates,
)

_MASK = (1 << 64) - 1

DEFAULT_THRESHOLD_DEG = {GeometryId.NIL: 60.0, GeometryId.SL2: 40.0}

CSV_HEADER = ("method,dt,seconds,max_dist_err,mean_dist_err,exceptional,"
              "max_angle_err_deg,mean_angle_err_deg")


def _splitmix64_stream(seed: int):
    state = seed & _MASK
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        yield (z ^ (z >> 31)) & _MASK


def sample_directions(n: int, seed: int) -> np.ndarray:
    """n unit 3-vectors from seeded Box-Muller pairs."""
    stream = _splitmix64_stream(seed)

    def uniform():
        return ((next(stream) >> 11) + 0.5) / float(1 << 53)

    out = np.empty((n, 3))
    gauss = []
    idx = 0
    while idx < n:
        while len(gauss) < 3:
            u1, u2 = uniform(), uniform()
            r = math.sqrt(-2.0 * math.log(u1))
            gauss.append(r * math.cos(2.0 * math.pi * u2))
            gauss.append(r * math.sin(2.0 * math.pi * u2))
        v = np.array(gauss[:3])
        gauss = gauss[3:]
        norm = math.sqrt(float(v @ v))
        if norm > 1e-12:
            out[idx] = v / norm
            idx += 1
    return out


# --- pulled-back ODE systems (vectorized over the sample axis) -----------------

def _rhs_nil(state: np.ndarray) -> np.ndarray:
    x, y = state[:, 0], state[:, 1]
    ux, uy, uz = state[:, 3], state[:, 4], state[:, 5]
    out = np.empty_like(state)
    out[:, 0] = ux
    out[:, 1] = uy
    out[:, 2] = uz + 0.5 * (x * uy - y * ux)
    out[:, 3] = -uz * uy
    out[:, 4] = uz * ux
    out[:, 5] = 0.0
    return out


def _rhs_sl2(state: np.ndarray) -> np.ndarray:
    q0, q1, q2, q3 = state[:, 0], state[:, 1], state[:, 2], state[:, 3]
    ux, uy, uw = state[:, 4], state[:, 5], state[:, 6]
    out = np.empty_like(state)
    out[:, 0] = 0.5 * (-uw * q1 + ux * q2 + uy * q3)
    out[:, 1] = 0.5 * (uw * q0 - uy * q2 + ux * q3)
    out[:, 2] = 0.5 * (ux * q0 - uy * q1 + uw * q3)
    out[:, 3] = 0.5 * (uy * q0 + ux * q1 - uw * q2)
    out[:, 4] = 2.0 * uy * uw
    out[:, 5] = -2.0 * ux * uw
    out[:, 6] = 0.0
    return out


def _rhs_e3(state: np.ndarray) -> np.ndarray:
    out = np.zeros_like(state)
    out[:, :3] = state[:, 3:]
    return out


def _rhs_sol(state: np.ndarray) -> np.ndarray:
    z = state[:, 2]
    ux, uy, uz = state[:, 3], state[:, 4], state[:, 5]
    ez = np.exp(z)
    out = np.empty_like(state)
    out[:, 0] = ez * ux
    out[:, 1] = uy / ez
    out[:, 2] = uz
    out[:, 3] = ux * uz
    out[:, 4] = -uy * uz
    out[:, 5] = uy * uy - ux * ux
    return out


def _initial_state(g: GeometryId, dirs: np.ndarray) -> np.ndarray:
    n = dirs.shape[0]
    if g is GeometryId.SL2:
        state = np.zeros((n, 7))
        state[:, 0] = 1.0
        state[:, 4:] = dirs
        return state
    state = np.zeros((n, 6))
    state[:, 3:] = dirs
    return state


_RHS = {GeometryId.NIL: _rhs_nil, GeometryId.SL2: _rhs_sl2,
        GeometryId.E3: _rhs_e3, GeometryId.SOL: _rhs_sol}


def _step(method: str, f, state: np.ndarray, dt: float) -> np.ndarray:
    if method == "euler":
        return state + dt * f(state)
    if method == "rk2":
        return state + dt * f(state + 0.5 * dt * f(state))
    k1 = f(state)
    k2 = f(state + 0.5 * dt * k1)
    k3 = f(state + 0.5 * dt * k2)
    k4 = f(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_batch(g: GeometryId, dirs: np.ndarray, t: float, dt: float,
                    method: str) -> np.ndarray:
    """Integrate the pulled-back geodesic system for a batch of directions."""
    if method not in ("euler", "rk2", "rk4"):
        raise PreconditionError(f"unknown method {method!r}")
    if dt > t:
        raise PreconditionError("dt must not exceed the flow time")
    f = _RHS[g]
    state = _initial_state(g, dirs)
    n_full = int(t / dt)
    for _ in range(n_full):
        state = _step(method, f, state, dt)
    rem = t - n_full * dt
    if rem > 1e-15:
        state = _step(method, f, state, rem)
    return state


def _numeric_points(g: GeometryId, states: np.ndarray):
    pts = []
    if g is GeometryId.SL2:
        for row in states:
            q = row[:4] / math.sqrt(max(-sl2.k_form(row[:4]), 1e-300))
            pts.append(GeometryPoint(g, q, sl2.fiber_mod(q)))
        return pts
    for row in states:
        pts.append(GeometryPoint(g, np.array([row[0], row[1], row[2], 1.0])))
    return pts


def integrate_numeric(g: GeometryId, u3: np.ndarray, t: float, dt: float,
                      method: str) -> GeometryPoint:
    """Single-direction convenience wrapper returning the numeric endpoint."""
    state = integrate_batch(g, np.asarray(u3, dtype=float)[None, :], t, dt, method)
    pt = _numeric_points(g, state)[0]
    if g is GeometryId.SL2:
        pt.fiber = _track_fiber(np.asarray(u3, dtype=float), t, dt, method)
    return pt


def _track_fiber(u3: np.ndarray, t: float, dt: float, method: str) -> float:
    """Integrate in steps and accumulate the fiber branch continuously."""
    f = _RHS[GeometryId.SL2]
    state = _initial_state(GeometryId.SL2, u3[None, :])
    w = 0.0
    prev = sl2.fiber_mod(state[0, :4])
    n_full = int(t / dt)
    steps = [dt] * n_full
    rem = t - n_full * dt
    if rem > 1e-15:
        steps.append(rem)
    for h in steps:
        state = _step(method, f, state, h)
        cur = sl2.fiber_mod(state[0, :4])
        w += math.remainder(cur - prev, 2.0 * math.pi)
        prev = cur
    return w


@dataclass
class BenchConfig:
    geometry: GeometryId
    n: int = 1000
    t: float = 6.0
    methods: tuple = ("euler", "rk2", "rk4")
    dts: tuple = (0.1, 0.01)
    seed: int = 0
    threshold_deg: float | None = None
    max_recovery_pairs: int = 8

    def validate(self):
        if self.n < 1 or self.t <= 0.0 or any(dt <= 0.0 for dt in self.dts):
            raise PreconditionError("benchmark requires n >= 1, t > 0, dt > 0")
        if self.geometry not in (GeometryId.NIL, GeometryId.SL2):
            raise PreconditionError(
                "the benchmark needs an exact inverse solver (nil or sl2)")


@dataclass
class BenchRow:
    method: str
    dt: float | None
    seconds: float
    max_dist_err: float
    mean_dist_err: float
    exceptional: int
    max_angle_err_deg: float
    mean_angle_err_deg: float

    def csv(self) -> str:
        dt = "" if self.dt is None else repr(self.dt)
        return ",".join([self.method, dt, repr(self.seconds),
                         repr(self.max_dist_err), repr(self.mean_dist_err),
                         str(self.exceptional), repr(self.max_angle_err_deg),
                         repr(self.mean_angle_err_deg)])


def _angle_between(u: np.ndarray, v: np.ndarray) -> float:
    c = float(u @ v) / math.sqrt(float(u @ u) * float(v @ v))
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def _recovered_angle(g: GeometryId, point: GeometryPoint, u3: np.ndarray,
                     max_pairs: int) -> float | None:
    mod = nil if g is GeometryId.NIL else sl2
    try:
        pairs = mod.lighting_pairs_origin(point, max_pairs=max_pairs)
    except Exception:
        return None
    best = None
    for pr in pairs:
        cand = frame_coordinates(g, pr.direction) if g is GeometryId.SL2 \
            else pr.direction[:3]
        ang = _angle_between(cand, u3)
        if best is None or ang < best:
            best = ang
    return best


def run_benchmark(cfg: BenchConfig) -> list:
    """Run the full method-by-step matrix; deterministic given the seed."""
    cfg.validate()
    g = cfg.geometry
    threshold = cfg.threshold_deg
    if threshold is None:
        threshold = DEFAULT_THRESHOLD_DEG[g]
    dirs = sample_directions(cfg.n, cfg.seed)
    t0 = time.perf_counter()
    exact_pts = []
    for i in range(cfg.n):
        of = flow_origin(g, dirs[i], cfg.t, want_transport=False)
        exact_pts.append(of.end)
    exact_seconds = time.perf_counter() - t0
    mod = nil if g is GeometryId.NIL else sl2
    rows = [BenchRow("exact", None, exact_seconds, 0.0, 0.0, 0, 0.0, 0.0)]
    for method in cfg.methods:
        for dt in cfg.dts:
            t0 = time.perf_counter()
            states = integrate_batch(g, dirs, cfg.t, dt, method)
            seconds = time.perf_counter() - t0
            pts = _numeric_points(g, states)
            if g is GeometryId.SL2:
                _assign_fibers(states, pts, dirs, cfg.t, dt, method)
            dist_errs = []
            angle_errs = []
            exceptional = 0
            for i in range(cfg.n):
                dist_errs.append(mod.distance(exact_pts[i], pts[i]))
                ang = _recovered_angle(g, pts[i], dirs[i], cfg.max_recovery_pairs)
                if ang is None or ang > threshold:
                    exceptional += 1
                else:
                    angle_errs.append(ang)
            de = np.array(dist_errs)
            ae = np.array(angle_errs) if angle_errs else np.zeros(1)
            rows.append(BenchRow(method, dt, seconds,
                                 float(de.max()), float(de.mean()),
                                 exceptional, float(ae.max()),
                                 float(ae.mean())))
    return rows


def _assign_fibers(states: np.ndarray, pts, dirs: np.ndarray, t: float,
                   dt: float, method: str) -> None:
    """Track fiber branches for a whole batch by re-stepping with snapshots."""
    f = _RHS[GeometryId.SL2]
    state = _initial_state(GeometryId.SL2, dirs)
    n = dirs.shape[0]
    w = np.zeros(n)
    prev = np.arctan2(state[:, 1], state[:, 0]) * 2.0
    n_full = int(t / dt)
    steps = [dt] * n_full
    rem = t - n_full * dt
    if rem > 1e-15:
        steps.append(rem)
    for h in steps:
        state = _step(method, f, state, h)
        cur = np.arctan2(state[:, 1], state[:, 0]) * 2.0
        delta = np.remainder(cur - prev + math.pi, 2.0 * math.pi) - math.pi
        w += delta
        prev = cur
    for i in range(n):
        pts[i].fiber = float(w[i])


def rows_to_csv(rows) -> str:
    return "\n".join([CSV_HEADER] + [row.csv() for row in rows]) + "\n"


def acceptable_angle_error(fov_degrees: float, pixels_wide: int) -> float:
    """Largest angle error (degrees) that cannot move a point by more than
    half a pixel anywhere on a screen with the given field of view."""
    if not (0.0 < fov_degrees < 180.0) or pixels_wide < 1:
        raise PreconditionError("fov in (0, 180) and at least one pixel required")
    beta = math.radians(fov_degrees)
    dm = 0.5 / pixels_wide
    tan_da = dm * math.sin(beta) / (1.0 + 2.0 * dm * math.sin(beta / 2.0) ** 2)
    return math.degrees(math.atan(tan_da))
