"""Universal cover of SL(2,R): lifted arithmetic, flow, solver, lattice."""
import math

import numpy as np
import pytest

from conftest import fd_area_density
from thurston import sl2
from thurston.integrators import integrate_batch, integrate_numeric
from thurston.kernel import (
    GeometryId,
    GeometryPoint,
    flow_origin,
    metric_dot,
    model_residual,
    origin,
    random_point,
    random_unit_tangent,
)
from thurston.quotient import teleport

SL2 = GeometryId.SL2
TAU = 2.0 * math.pi


def cyl_point(rho, theta, w):
    h = np.array([math.sinh(rho) * math.cos(theta),
                  math.sinh(rho) * math.sin(theta), math.cosh(rho)])
    return sl2.point_from_h2_fiber(h, w)


def test_model_membership(rng):
    for _ in range(100):
        p = sl2.random_point(rng, 2.0)
        assert abs(sl2.k_form(p.coords) + 1.0) < 1e-12
        assert model_residual(p) < 1e-9
        # the stored pair reproduces the quadric point through the section
        h = sl2.h2_point(p)
        rebuilt = sl2.point_from_h2_fiber(h, p.fiber)
        assert np.abs(rebuilt.coords - p.coords).max() < 1e-7


def test_metric_left_invariant(rng):
    for _ in range(60):
        p = sl2.random_point(rng, 1.5)
        q = sl2.random_point(rng, 1.5)
        u = random_unit_tangent(p, rng).dir
        v = random_unit_tangent(p, rng).dir
        iso = sl2.left_isometry(q)
        p2 = iso.apply_point(p)
        u2 = iso.matrix @ u
        v2 = iso.matrix @ v
        assert metric_dot(p, u, v) == pytest.approx(
            metric_dot(p2, u2, v2), abs=1e-9)


def test_lifted_multiplication(rng):
    for _ in range(50):
        a = sl2.left_isometry(sl2.random_point(rng, 1.5))
        b = sl2.left_isometry(sl2.random_point(rng, 1.5))
        c = sl2.left_isometry(sl2.random_point(rng, 1.5))
        lhs = a.compose(b).compose(c)
        rhs = a.compose(b.compose(c))
        assert np.abs(lhs.matrix - rhs.matrix).max() < 1e-12
        assert lhs.fiber_shift == pytest.approx(rhs.fiber_shift, abs=1e-12)
        inv = a.compose(a.inverse())
        assert np.abs(inv.matrix - np.eye(4)).max() < 1e-12
        assert inv.fiber_shift == pytest.approx(0.0, abs=1e-12)


def test_flow_fiber_translation():
    of = flow_origin(SL2, np.array([0.0, 0.0, 1.0]), 2.5)
    assert of.end.fiber == pytest.approx(2.5, abs=1e-12)
    assert sl2.horizontal_radius(of.end) == pytest.approx(0.0, abs=1e-12)


def test_flow_horizontal_projects_to_geodesic():
    of = flow_origin(SL2, np.array([1.0, 0.0, 0.0]), 1.0)
    h = sl2.h2_point(of.end)
    assert math.acosh(h[2]) == pytest.approx(1.0, abs=1e-12)
    assert of.end.fiber == pytest.approx(0.0, abs=1e-12)


def test_flow_matches_rk4_oracle(rng):
    dirs = []
    for _ in range(150):
        u = rng.normal(size=3)
        dirs.append(u / np.linalg.norm(u))
    dirs = np.array(dirs)
    states = integrate_batch(SL2, dirs, 6.0, 1e-4, "rk4")
    worst = 0.0
    for i in range(len(dirs)):
        of = flow_origin(SL2, dirs[i], 6.0)
        q = states[i, :4] / math.sqrt(-sl2.k_form(states[i, :4]))
        worst = max(worst, np.abs(of.end.coords - q).max())
    assert worst < 1e-7


def test_flow_fiber_branch_matches_oracle(rng):
    for _ in range(15):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        of = flow_origin(SL2, u, 7.0)
        num = integrate_numeric(SL2, u, 7.0, 1e-3, "rk4")
        assert of.end.fiber == pytest.approx(num.fiber, abs=1e-6)


def test_phase_residual_domain_and_zero():
    assert sl2.phase_residual(1.0, 0.0, 0.0) == pytest.approx(0.0)
    with pytest.raises(sl2.PhaseDomainError):
        # center of the first undefined strip
        sl2.phase_residual(1.0, 15.0, -math.pi)


def test_phase_residual_decreasing_at_zero():
    h = 1e-5
    d = (sl2.phase_residual(1.0, 3.0, h) - sl2.phase_residual(1.0, 3.0, -h)) / (2 * h)
    assert d < 0.0


def test_branch_boundary_continuity():
    # residual continuous where |tan(phi)| crosses sinh(rho/2)
    rho, w = 1.2, 4.0
    phi0 = -math.atan(math.sinh(rho / 2.0))
    left = sl2.phase_residual(rho, w, phi0 - 1e-9)
    right = sl2.phase_residual(rho, w, phi0 + 1e-9)
    assert left == pytest.approx(right, abs=1e-7)
    # and through the tangent pole inside the rotational regime
    mid = [sl2.phase_residual(rho, w, -math.pi / 2 + e)
           for e in (-1e-7, 0.0, 1e-7)]
    assert max(mid) - min(mid) < 1e-6


def test_exactly_three_roots_reference_point():
    roots = sl2.phase_roots(1.0, 15.0)
    assert len(roots) == 3


def test_axis_pairs():
    p = cyl_point(0.0, 0.0, 2.0)
    pairs = sl2.lighting_pairs_origin(p, max_pairs=8)
    assert len(pairs) == 1
    assert pairs[0].length == pytest.approx(2.0)
    p = cyl_point(0.0, 0.0, 15.0)
    pairs = sl2.lighting_pairs_origin(p, max_pairs=8)
    families = [pr for pr in pairs if pr.family]
    axial = [pr for pr in pairs if not pr.family]
    assert len(families) == 2 and len(axial) == 1
    t1 = TAU * math.sqrt(0.5 * (15.0 / TAU + 1.0) ** 2 - 1.0)
    assert min(pr.length for pr in families) == pytest.approx(t1, abs=1e-9)


def test_solver_roundtrip(rng):
    for _ in range(25):
        p = cyl_point(rng.uniform(0.05, 1.8), rng.uniform(0, TAU),
                      rng.uniform(-12.0, 12.0))
        pairs = sl2.lighting_pairs_origin(p, max_pairs=5)
        assert pairs
        lengths = [pr.length for pr in pairs]
        assert lengths == sorted(lengths)
        for pr in pairs:
            u3 = np.array([2 * pr.direction[2], 2 * pr.direction[3],
                           2 * pr.direction[1]])
            of = flow_origin(SL2, u3, pr.length)
            assert np.abs(of.end.coords - p.coords).max() < 1e-7
            assert of.end.fiber == pytest.approx(p.fiber, abs=1e-7)


def test_comparison_bound(rng):
    for _ in range(1000):
        p = sl2.random_point(rng, 1.5)
        dx = sl2.distance_from_origin(p)
        dy = 2.0 * sl2.comparison_half_distance(p)
        assert dx <= dy + 1e-9
        assert dy <= 2.0 * dx + 1e-9


def test_ball_bound(rng):
    assert sl2.sdf_ball(0.5, 0.5, origin(SL2)) == pytest.approx(-0.5)
    r = 0.4
    for _ in range(500):
        p = sl2.random_point(rng, 2.0)
        d = sl2.distance_from_origin(p)
        if d < 1e-6:
            continue
        assert sl2.sdf_ball(r, 0.5, p) <= d - r + 1e-6


def test_vertical_sdfs():
    p = cyl_point(1.0, 0.3, 5.0)
    assert sl2.sdf_vertical_cylinder(1.0, p) == pytest.approx(0.0, abs=1e-12)
    assert sl2.sdf_vertical_cylinder(0.25, p) == pytest.approx(0.75, abs=1e-12)
    # half-plane through the origin: sign flips across it
    above = cyl_point(0.7, math.pi / 2.0, 0.0)
    below = cyl_point(0.7, -math.pi / 2.0, 0.0)
    assert sl2.sdf_vertical_half_space(above) > 0.0
    assert sl2.sdf_vertical_half_space(below) < 0.0
    assert sl2.sdf_vertical_half_space(cyl_point(0.7, 0.0, 3.0)) == \
        pytest.approx(0.0, abs=1e-12)
    # pullback distance equals the plane distance
    d = sl2.sdf_vertical_half_space(above)
    assert d == pytest.approx(math.asinh(math.sinh(0.7)), abs=1e-12)


def test_projection_lipschitz_along_flows(rng):
    from thurston.product import h2_distance
    for _ in range(40):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        t = rng.uniform(0.2, 2.0)
        of = flow_origin(SL2, u, t)
        d_h2 = h2_distance(np.array([0.0, 0.0, 1.0]), sl2.h2_point(of.end))
        assert d_h2 <= t + 1e-9


def test_area_density_fd(rng):
    for _ in range(40):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        r = rng.uniform(0.3, 2.4)
        ref = fd_area_density(SL2, u, r)
        if ref < 1e-3:
            continue
        assert sl2.area_density_direction(u, r) == pytest.approx(ref, rel=1e-3)


def test_area_density_limits(rng):
    assert sl2.area_density(1e-9, TAU) == pytest.approx(0.0, abs=1e-9)
    r = 0.05
    assert sl2.area_density_direction(np.array([0.6, 0, 0.8]), r) == \
        pytest.approx(r * r, rel=1e-3)
    # the cone series branch agrees with the finite-difference oracle
    for _ in range(15):
        ang = math.pi / 4.0 + rng.uniform(-4e-3, 4e-3)
        theta = rng.uniform(0, TAU)
        a, c = math.cos(ang), math.sin(ang)
        u = np.array([a * math.cos(theta), a * math.sin(theta), c])
        r = rng.uniform(0.3, 2.0)
        ref = fd_area_density(SL2, u, r)
        assert sl2.area_density_direction(u, r) == pytest.approx(ref, rel=1e-4)


def test_genus_two_lattice_algebra():
    qs = sl2.genus_two_lattice()
    b1i, a1, b1, a1i, b2i, a2, b2, a2i, ci, c = qs.generators

    def comm(x, y):
        return x.compose(y).compose(x.inverse()).compose(y.inverse())

    lhs = ci.compose(ci)
    rhs = comm(a1, b1).compose(comm(a2, b2))
    assert np.abs(lhs.matrix - rhs.matrix).max() < 1e-12
    assert lhs.fiber_shift == pytest.approx(rhs.fiber_shift, abs=1e-9)
    assert lhs.fiber_shift == pytest.approx(-4.0 * math.pi, abs=1e-9)


def test_genus_two_teleport(rng):
    qs = sl2.genus_two_lattice()
    inside = cyl_point(0.1, 0.4, 0.5)
    same, _ = teleport(qs, inside)
    assert np.abs(same.coords - inside.coords).max() < 1e-12
    # moving a face-violating point brings its projection closer to the origin
    b1_inv = qs.generators[0]
    far = cyl_point(1.8, 0.0, 0.0)   # violates <k, n1> <= delta
    k1, _ = sl2.klein_coords(far)
    assert k1 > sl2.OCTAGON_MARGIN
    moved = b1_inv.apply_point(far)
    assert sl2.horizontal_radius(moved) < sl2.horizontal_radius(far)
    for _ in range(400):
        p = cyl_point(rng.uniform(0.0, 2.2), rng.uniform(0, TAU),
                      rng.uniform(-9.0, 9.0))
        moved, iso = teleport(qs, p)
        assert qs.inside(moved)
        again, _ = teleport(qs, moved)
        assert np.abs(again.coords - moved.coords).max() < 1e-12
        rebuilt = iso.apply_point(p)
        assert np.abs(rebuilt.coords - moved.coords).max() < 1e-9
        assert rebuilt.fiber == pytest.approx(moved.fiber, abs=1e-9)
