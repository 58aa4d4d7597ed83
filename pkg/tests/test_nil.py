"""Nil geometry: exact flow, phase solver, ball bound, density, lattice."""
import math

import numpy as np
import pytest

from conftest import fd_area_density
from thurston import nil
from thurston.integrators import integrate_batch
from thurston.kernel import (
    GeometryId,
    GeometryPoint,
    PreconditionError,
    flow_origin,
    origin,
)
from thurston.quotient import teleport

NIL = GeometryId.NIL


def pt(x, y, z):
    return GeometryPoint(NIL, np.array([x, y, z, 1.0]))


def test_flow_planar_and_vertical():
    of = flow_origin(NIL, np.array([1.0, 0, 0]), 2.0)
    assert np.allclose(of.end.coords, [2, 0, 0, 1], atol=1e-14)
    of = flow_origin(NIL, np.array([0, 0, 1.0]), 3.0)
    assert np.allclose(of.end.coords, [0, 0, 3, 1], atol=1e-14)


def test_flow_matches_rk4_oracle(rng):
    dirs = []
    for _ in range(200):
        u = rng.normal(size=3)
        dirs.append(u / np.linalg.norm(u))
    dirs = np.array(dirs)
    states = integrate_batch(NIL, dirs, 6.0, 1e-4, "rk4")
    worst = 0.0
    for i in range(len(dirs)):
        of = flow_origin(NIL, dirs[i], 6.0)
        worst = max(worst, np.abs(of.end.coords[:3] - states[i, :3]).max())
    assert worst < 1e-8


def test_flow_series_branch_continuity():
    # same endpoint when |c t| straddles the series switch
    for ct in (nil.SERIES_PHI * 0.98, nil.SERIES_PHI * 1.02):
        t = 2.0
        c = ct / t
        a = math.sqrt(1 - c * c)
        of = flow_origin(NIL, np.array([a, 0.0, c]), t)
        ref = integrate_batch(NIL, np.array([[a, 0.0, c]]), t, 1e-4, "rk4")[0]
        assert np.abs(of.end.coords[:3] - ref[:3]).max() < 1e-10


def test_phase_residual_properties():
    # height enters additively
    assert nil.phase_residual(1.3, 5.0, 2.2) + 5.0 == pytest.approx(
        nil.phase_residual(1.3, 0.0, 2.2), abs=1e-12)
    assert nil.phase_residual(2.0, 0.0, 0.0) == pytest.approx(0.0)
    with pytest.raises(nil.PhasePoleError):
        nil.phase_residual(1.0, 5.0, 2.0 * math.pi)


def test_phase_residual_convexity(rng):
    # finite-difference second derivative is positive between the poles
    for k in (1, 2):
        for _ in range(40):
            phi = rng.uniform(2 * math.pi * k + 0.2, 2 * math.pi * (k + 1) - 0.2)
            h = 1e-4
            f = lambda x: nil.phase_residual(1.7, 9.0, x)
            second = (f(phi + h) - 2 * f(phi) + f(phi - h)) / (h * h)
            assert second > 0.0


def test_exactly_three_roots_reference_point():
    roots = nil.phase_roots(2.0, 15.0)
    assert len(roots) == 3


def test_axis_families():
    pairs = nil.lighting_pairs_origin(pt(0, 0, 15.0), max_pairs=8)
    families = [p for p in pairs if p.family]
    axial = [p for p in pairs if not p.family]
    assert len(families) == 2 and len(axial) == 1
    assert axial[0].length == pytest.approx(15.0)
    t1 = 2.0 * math.pi * math.sqrt(15.0 / math.pi - 1.0)
    assert min(p.length for p in families) == pytest.approx(t1, abs=1e-9)
    for pr in pairs:
        of = flow_origin(NIL, pr.direction[:3], pr.length)
        assert np.abs(of.end.coords - pt(0, 0, 15.0).coords).max() < 1e-7


def test_planar_point_is_euclidean():
    pairs = nil.lighting_pairs_origin(pt(3.0, 4.0, 0.0))
    assert len(pairs) == 1
    assert pairs[0].length == pytest.approx(5.0)
    assert np.allclose(pairs[0].direction[:3], [0.6, 0.8, 0.0])


def test_solver_roundtrip_generic(rng):
    for _ in range(30):
        p = pt(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-8, 8))
        pairs = nil.lighting_pairs_origin(p, max_pairs=5)
        assert pairs, "at least the minimizing geodesic must be found"
        for pr in pairs:
            of = flow_origin(NIL, pr.direction[:3], pr.length)
            assert np.abs(of.end.coords - p.coords).max() < 1e-7


def test_minimizing_root_gives_distance(rng):
    # flowing the first pair lands on the point; no shorter pair exists
    for _ in range(20):
        p = pt(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
               rng.uniform(0.1, 5.0))
        pairs = nil.lighting_pairs_origin(p, max_pairs=6)
        lengths = [pr.length for pr in pairs]
        assert lengths == sorted(lengths)
        of = flow_origin(NIL, pairs[0].direction[:3], pairs[0].length)
        assert np.abs(of.end.coords - p.coords).max() < 1e-7


def test_origin_rejected():
    with pytest.raises(PreconditionError):
        nil.lighting_pairs_origin(origin(NIL))


def test_vertical_sdfs():
    assert nil.sdf_vertical(lambda x, y: abs(x) - 0.0, pt(3, 0, 7)) == \
        pytest.approx(3.0)
    assert nil.sdf_vertical_cylinder(1.0, pt(2, 0, 5)) == pytest.approx(1.0)
    assert nil.sdf_vertical_cylinder(1.0, pt(1, 0, -3)) == pytest.approx(0.0)


def test_vertical_sdf_matches_marched_first_hit(rng):
    # marching with the vertical-object distance lands on its zero level
    from thurston.kernel import TangentVector, advance, metric_norm
    eps = 1e-6
    sdf = lambda p: nil.sdf_vertical_cylinder(0.6, p)
    tested = 0
    while tested < 40:
        p = pt(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2))
        if sdf(p) < 0.05:
            continue
        u = rng.normal(size=4)
        u[3] = 0.0
        v = TangentVector(p, u)
        v = TangentVector(p, v.dir / metric_norm(v))
        total = 0.0
        land = None
        for _ in range(300):
            val = sdf(v.base)
            if val < eps:
                land = v.base
                break
            v = advance(v, val)
            total += val
            if total > 12.0:
                break
        if land is None:
            continue
        tested += 1
        assert abs(sdf(land)) < 2 * eps


def test_ball_bound_properties(rng):
    assert nil.sdf_ball(0.5, 0.5, origin(NIL)) == pytest.approx(-0.5)
    for _ in range(500):
        p = pt(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-6, 6))
        d = nil.distance_from_origin(p)
        if d < 1e-6:
            continue
        # the envelope never exceeds the true distance
        assert nil.ball_bound(p) <= d + 1e-9
        # and the two-branch ball bound never exceeds the true value
        r = 0.4
        assert nil.sdf_ball(r, 0.5, p) <= d - r + 1e-6


def test_ball_near_branch_is_exact(rng):
    for _ in range(30):
        p = pt(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
               rng.uniform(-0.8, 0.8))
        d = nil.distance_from_origin(p)
        assert nil.sdf_ball(0.5, 0.5, p) == pytest.approx(d - 0.5, abs=1e-6)


def test_area_density_refocusing_and_fd(rng):
    # vertical refocusing at fiber period
    assert nil.area_density(0.0, 2.0 * math.pi) == pytest.approx(0.0, abs=1e-12)
    # small radius limit is euclidean
    r = 0.05
    assert nil.area_density_direction(np.array([0.6, 0, 0.8]), r) == \
        pytest.approx(r * r, rel=1e-3)
    for _ in range(40):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        r = rng.uniform(0.3, 2.4)
        ref = fd_area_density(NIL, u, r)
        if ref < 1e-3:
            continue
        assert nil.area_density_direction(u, r) == pytest.approx(ref, rel=1e-4)


def test_area_density_series_continuity():
    # no jump across the series switch (genuine variation is ~1e-12 here)
    delta = 1e-9
    lo = nil.area_density(1.2, nil.SERIES_Z - delta)
    hi = nil.area_density(1.2, nil.SERIES_Z + delta)
    assert lo == pytest.approx(hi, rel=1e-9)


def test_heisenberg_lattice_teleport(rng):
    qs = nil.heisenberg_lattice()
    moved, iso = teleport(qs, pt(0.7, 0.0, 0.0))
    assert np.allclose(moved.coords, [-0.3, 0, 0, 1], atol=1e-12)
    inside = pt(0.2, -0.3, 0.1)
    same, iso = teleport(qs, inside)
    assert np.allclose(same.coords, inside.coords)
    for _ in range(500):
        p = pt(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4))
        moved, iso = teleport(qs, p)
        assert qs.inside(moved)
        again, _ = teleport(qs, moved)
        assert np.allclose(again.coords, moved.coords)
        # the accumulated isometry reproduces the move
        assert np.allclose(iso.apply_point(p).coords, moved.coords, atol=1e-9)


def test_heisenberg_phase_order():
    # the central generator never disturbs the horizontal coordinates
    qs = nil.heisenberg_lattice()
    p = pt(1.3, -0.9, 2.6)
    moved, _ = teleport(qs, p)
    assert abs(moved.coords[0]) <= 0.5 + 1e-9
    assert abs(moved.coords[1]) <= 0.5 + 1e-9
    assert abs(moved.coords[2]) <= 0.5 + 1e-9
