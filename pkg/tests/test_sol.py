"""Sol geometry: mixed-policy flow, closed-form SDFs, lattice."""
import math

import numpy as np
import pytest

from thurston import sol
from thurston.integrators import integrate_batch
from thurston.kernel import (
    GeometryId,
    GeometryPoint,
    TangentVector,
    advance,
    flow,
    flow_origin,
    metric_norm,
    origin,
)
from thurston.quotient import teleport

SOL = GeometryId.SOL
PHI = (1.0 + math.sqrt(5.0)) / 2.0


def pt(x, y, z):
    return GeometryPoint(SOL, np.array([x, y, z, 1.0]))


def test_plane_flows():
    of = flow_origin(SOL, np.array([0.0, 1.0, 0.0]), 1.0)
    assert np.allclose(of.end.coords,
                       [0.0, math.tanh(1.0), math.log(math.cosh(1.0)), 1.0],
                       atol=1e-14)
    # the other hyperbolic plane is the mirror image
    of2 = flow_origin(SOL, np.array([1.0, 0.0, 0.0]), 1.0)
    assert of2.end.coords[0] == pytest.approx(math.tanh(1.0), abs=1e-14)
    assert of2.end.coords[2] == pytest.approx(-math.log(math.cosh(1.0)),
                                              abs=1e-14)


def test_flow_matches_rk4_oracle(rng):
    dirs = []
    while len(dirs) < 80:
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        if min(abs(u[0]), abs(u[1])) > sol.PLANE_BAND:
            dirs.append(u)
    dirs = np.array(dirs)
    for t, tol in ((3.0, 1e-5), (6.0, 1e-5)):
        states = integrate_batch(SOL, dirs, t, 1e-4, "rk4")
        worst = 0.0
        for i in range(len(dirs)):
            of = flow_origin(SOL, dirs[i], t)
            worst = max(worst, np.abs(of.end.coords[:3] - states[i, :3]).max())
        assert worst < tol


def test_flow_in_expansion_band(rng):
    # directions hugging the hyperbolic planes use the fine numeric fallback
    dirs = []
    while len(dirs) < 10:
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        if 1e-5 < abs(u[0]) < 5e-4:
            dirs.append(u)
    dirs = np.array(dirs)
    states = integrate_batch(SOL, dirs, 4.0, 5e-5, "rk4")
    for i in range(len(dirs)):
        of = flow_origin(SOL, dirs[i], 4.0)
        assert np.abs(of.end.coords[:3] - states[i, :3]).max() < 1e-3


def test_flow_policy_continuity():
    # endpoints agree across the short-flow switch
    u = np.array([0.53, 0.64, math.sqrt(1 - 0.53 ** 2 - 0.64 ** 2)])
    lo = flow_origin(SOL, u, sol.T_SWITCH * 0.999)
    hi = flow_origin(SOL, u, sol.T_SWITCH * 1.001)
    assert np.abs(hi.end.coords - lo.end.coords).max() < 5e-4


def test_unit_speed(rng):
    for _ in range(100):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        of = flow_origin(SOL, u, rng.uniform(0.2, 4.0))
        v = TangentVector(of.end, of.iso.matrix @ np.array(
            [of.u_end[0], of.u_end[1], of.u_end[2], 0.0]))
        assert abs(metric_norm(v) - 1.0) < 1e-6


def test_reflection_equivariance(rng):
    # conjugating the direction by the coordinate flips conjugates the endpoint
    for _ in range(40):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        t = rng.uniform(0.3, 3.0)
        base = flow_origin(SOL, u, t).end.coords
        fx = flow_origin(SOL, u * np.array([-1, 1, 1]), t).end.coords
        assert np.abs(fx - base * np.array([-1, 1, 1, 1])).max() < 1e-9
        fy = flow_origin(SOL, u * np.array([1, -1, 1]), t).end.coords
        assert np.abs(fy - base * np.array([1, -1, 1, 1])).max() < 1e-9
        # the xy swap with z flip is also an isometry
        swapped = flow_origin(SOL, np.array([u[1], u[0], -u[2]]), t).end.coords
        assert np.abs(swapped - np.array([base[1], base[0], -base[2], 1.0])).max() < 1e-9


def test_half_space_values():
    assert sol.sdf_z_half_space(0.0, -1, pt(5, -2, 1.5)) == pytest.approx(1.5)
    assert sol.sdf_z_half_space(0.0, -1, pt(1, 1, 0)) == pytest.approx(0.0)
    assert sol.sdf_z_half_space(1.0, 1, pt(0, 0, 0)) == pytest.approx(1.0)
    assert sol.sdf_x_half_space(1.0, 1, origin(SOL)) == pytest.approx(
        math.asinh(1.0), abs=1e-14)
    assert sol.sdf_x_half_space(0.7, 1, pt(0.7, 3.0, -2.0)) == pytest.approx(0.0)
    # sign convention resolved against the complementary half-space
    assert sol.sdf_y_half_space(-1.0, -1, pt(0, 0, math.log(2.0))) == \
        pytest.approx(math.asinh(2.0), abs=1e-12)


def test_cylinder_values():
    assert sol.sdf_cylinder_x(0.4, pt(2.5, 0, 0)) == pytest.approx(-0.4)
    assert sol.sdf_cylinder_x(1.0, pt(0, 1, 0)) == pytest.approx(
        math.acosh(1.5) - 1.0, abs=1e-12)
    # the xy swap with z flip exchanges the two cylinders
    p = pt(1.3, 0.0, 0.7)
    assert sol.sdf_cylinder_y(0.8, p) == pytest.approx(
        sol.sdf_cylinder_x(0.8, pt(0.0, 1.3, -0.7)), abs=1e-12)


def test_pseudo_ball():
    assert sol.sdf_pseudo_ball(0.6, origin(SOL)) == pytest.approx(-0.6)
    assert sol.pseudo_distance(pt(1, 0, 0)) == pytest.approx(1.0)


def march_first_hit(sdf, start, direction, eps=1e-6, max_steps=400):
    v = TangentVector(start, direction)
    total = 0.0
    for _ in range(max_steps):
        val = sdf(v.base)
        if val < eps:
            return total, v.base
        v = advance(v, val)
        total += val
    return None, None


def test_marched_first_hit_matches_closed_forms(rng):
    # closed-form SDF values agree with marched first-hit distances
    shapes = [
        lambda p: sol.sdf_z_half_space(-1.2, -1, p),
        lambda p: sol.sdf_z_half_space(1.1, 1, p),
        lambda p: sol.sdf_x_half_space(1.4, 1, p),
        lambda p: sol.sdf_x_half_space(-1.4, -1, p),
        lambda p: sol.sdf_y_half_space(1.3, 1, p),
        lambda p: sol.sdf_y_half_space(-1.3, -1, p),
        lambda p: sol.sdf_cylinder_x(0.5, p),
        lambda p: sol.sdf_cylinder_y(0.5, p),
    ]
    eps = 1e-6
    for sdf in shapes:
        tested = 0
        while tested < 25:
            p = pt(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
                   rng.uniform(-0.6, 0.6))
            d0 = sdf(p)
            if d0 < 0.05:
                continue
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            v = TangentVector(p, np.array([u[0], u[1], u[2], 0.0]))
            v = TangentVector(p, v.dir / metric_norm(v))
            hit, land = march_first_hit(sdf, p, v.dir, eps=eps)
            if hit is None:
                continue
            tested += 1
            # soundness along the ray: the march lands on the zero level
            assert sdf(land) < 2 * eps
            assert hit >= d0 - 1e-9


def test_anosov_lattice(rng):
    qs = sol.anosov_lattice()
    tau = 2.0 * math.log(PHI)
    b = qs.generators[4]
    moved = b.apply_point(origin(SOL))
    assert moved.coords[2] == pytest.approx(tau, abs=1e-12)
    p = pt(0.0, 0.0, tau * 0.7)
    inside, _ = teleport(qs, p)
    assert inside.coords[2] == pytest.approx(-tau * 0.3, abs=1e-12)
    same, _ = teleport(qs, pt(0.05, -0.04, 0.1))
    assert np.allclose(same.coords, [0.05, -0.04, 0.1, 1.0])
    for _ in range(500):
        p = pt(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3))
        moved, iso = teleport(qs, p)
        assert qs.inside(moved)
        again, _ = teleport(qs, moved)
        assert np.abs(again.coords - moved.coords).max() < 1e-10
        assert np.abs(iso.apply_point(p).coords - moved.coords).max() < 1e-9
