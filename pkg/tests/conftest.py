import math

import numpy as np
import pytest

from thurston.kernel import GeometryId, flow_origin, metric_dot


def fd_area_density(g: GeometryId, u3, r: float, h: float = 1e-4) -> float:
    """Independent area-density oracle: wedge norm of central differences of
    the exponential map over the unit tangent sphere."""
    u3 = np.asarray(u3, dtype=float)
    axis = np.array([1.0, 0.0, 0.0]) if abs(u3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    v = axis - (axis @ u3) * u3
    v /= np.linalg.norm(v)
    w = np.cross(u3, v)

    def endpoint(d3):
        return flow_origin(g, d3, r, want_transport=False).end

    base = endpoint(u3)

    def deriv(b):
        plus = endpoint(math.cos(h) * u3 + math.sin(h) * b)
        minus = endpoint(math.cos(h) * u3 - math.sin(h) * b)
        return (plus.coords - minus.coords) / (2.0 * h)

    dv = deriv(v)
    dw = deriv(w)
    gvv = metric_dot(base, dv, dv)
    gww = metric_dot(base, dw, dw)
    gvw = metric_dot(base, dv, dw)
    return math.sqrt(max(gvv * gww - gvw * gvw, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
