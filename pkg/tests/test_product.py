"""Product geometries: split flows, vertical/horizontal SDFs, wrap lighting."""
import math

import numpy as np
import pytest

from conftest import fd_area_density
from thurston import product
from thurston.kernel import (
    DegenerateConfigurationError,
    GeometryId,
    GeometryPoint,
    TangentVector,
    flow,
    origin,
    random_point,
)

S2E, H2E = GeometryId.S2E, GeometryId.H2E


def test_flow_pure_fiber():
    v = TangentVector(origin(S2E), np.array([0, 0, 0, 1.0]))
    res = flow(v, 5.0)
    assert np.allclose(res.end.coords, [0, 0, 1, 5])


def test_flow_sphere_antipode():
    v = TangentVector(origin(S2E), np.array([1.0, 0, 0, 0]))
    res = flow(v, math.pi)
    assert np.allclose(res.end.coords, [0, 0, -1, 0], atol=1e-12)


def test_flow_mixed_components():
    lam = 1.0 / math.sqrt(2.0)
    v = TangentVector(origin(H2E), np.array([lam, 0, 0, lam]))
    res = flow(v, math.sqrt(2.0))
    assert np.allclose(res.end.coords,
                       [math.sinh(1.0), 0, math.cosh(1.0), 1.0], atol=1e-12)


def test_sdf_values():
    p = GeometryPoint(H2E, np.array([0, 0, 1.0, 2.0]))
    assert product.sdf_horizontal_half_space(H2E, p) == pytest.approx(2.0)
    assert product.sdf_vertical_cylinder(S2E, 0.4, origin(S2E)) == \
        pytest.approx(-0.4)
    p = GeometryPoint(S2E, np.array([math.cos(0.3), math.sin(0.3), 0.0, 0.7]))
    assert product.sdf_vertical_half_space(S2E, p) == pytest.approx(0.3)


def test_lighting_singleton_h2e():
    s = origin(H2E)
    q = GeometryPoint(H2E, np.array([math.sinh(1.0), 0, math.cosh(1.0), 1.0]))
    (pair,) = product.lighting_pairs(s, q)
    assert pair.length == pytest.approx(math.sqrt(2.0), abs=1e-12)
    res = flow(TangentVector(s, pair.direction), pair.length)
    assert np.abs(res.end.coords - q.coords).max() < 1e-9


def test_lighting_wraps_s2e():
    s = origin(S2E)
    q_y = np.array([math.sin(1.0), 0.0, math.cos(1.0)])
    q = GeometryPoint(S2E, np.array([q_y[0], q_y[1], q_y[2], 0.0]))
    pairs = product.lighting_pairs(s, q, max_pairs=2)
    lengths = [p.length for p in pairs]
    assert lengths[0] == pytest.approx(1.0, abs=1e-12)
    assert lengths[1] == pytest.approx(2 * math.pi - 1.0, abs=1e-12)
    # truncation keeps the shortest only
    only = product.lighting_pairs(s, q, max_pairs=1)
    assert len(only) == 1 and only[0].length == pytest.approx(1.0)
    # lengths strictly increase with the wrap index
    many = product.lighting_pairs(s, q, max_pairs=6)
    ls = [p.length for p in many]
    assert all(b > a for a, b in zip(ls, ls[1:]))
    # every reported geodesic actually reaches the light
    for pair in many:
        res = flow(TangentVector(s, pair.direction), pair.length)
        assert np.abs(res.end.coords - q.coords).max() < 1e-8


def test_lighting_antipodal_degenerate():
    s = origin(S2E)
    q = GeometryPoint(S2E, np.array([0.0, 0.0, -1.0, 0.5]))
    with pytest.raises(DegenerateConfigurationError):
        product.lighting_pairs(s, q)


def test_factor_projection_lipschitz(rng):
    for g in (S2E, H2E):
        dist_y = product.s2_distance if g is S2E else product.h2_distance
        for _ in range(100):
            a = random_point(g, rng, 1.5)
            b = random_point(g, rng, 1.5)
            assert product.distance(a, b) >= dist_y(a.coords[:3], b.coords[:3]) - 1e-12


def test_area_density_vertical_exact():
    for g in (S2E, H2E):
        assert product.area_density(g, 3.0, 0.0) == pytest.approx(9.0)


def test_area_density_values():
    assert product.area_density(S2E, math.pi, math.pi / 2) == \
        pytest.approx(0.0, abs=1e-12)
    assert product.area_density(H2E, 1.0, math.pi / 2) == \
        pytest.approx(math.sinh(1.0), abs=1e-12)


def test_area_density_matches_fd(rng):
    for g in (S2E, H2E):
        for _ in range(25):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            r = rng.uniform(0.3, 2.4)
            ref = fd_area_density(g, u, r)
            if ref < 1e-3:
                continue
            beta = math.acos(min(1.0, abs(u[2])))
            assert product.area_density(g, r, beta) == pytest.approx(ref, rel=1e-4)


def test_area_density_series_branch_continuous():
    for g in (S2E, H2E):
        lo = product.area_density(g, 1.7, product.SMALL_ANGLE * 0.999)
        hi = product.area_density(g, 1.7, product.SMALL_ANGLE * 1.001)
        assert lo == pytest.approx(hi, rel=1e-9)
