"""Complete elliptic integrals and Jacobi elliptic functions via the
arithmetic-geometric mean.

The modulus convention is k (not the parameter m = k^2): K(k) and E(k) are
the complete integrals of the first and second kind, sn/cn/dn the Jacobi
functions, and jacobi_zeta the zeta function Z(u) = E(am u, k) - (E/K) u.
sn and cn are 4K-periodic; arguments are reduced before the Landen descent,
so large arguments (as produced by long flows) stay accurate.
"""
from __future__ import annotations

import math

AGM_TOL = 1e-15
_MAX_ITERS = 64


def _check_modulus(k: float) -> None:
    if not (0.0 <= k < 1.0):
        raise ValueError(f"elliptic modulus must be in [0, 1), got {k}")


def _agm_scale(k: float):
    """Shared AGM iteration: lists of a_n, c_n and the common limit."""
    a = 1.0
    b = math.sqrt(1.0 - k * k)
    c = k
    a_seq = [a]
    c_seq = [c]
    for _ in range(_MAX_ITERS):
        an = 0.5 * (a + b)
        bn = math.sqrt(a * b)
        cn = 0.5 * (a - b)
        a, b, c = an, bn, cn
        a_seq.append(a)
        c_seq.append(c)
        if abs(c) < AGM_TOL:
            break
    return a_seq, c_seq


def elliptic_K(k: float) -> float:
    _check_modulus(k)
    a_seq, _ = _agm_scale(k)
    return math.pi / (2.0 * a_seq[-1])


def elliptic_E(k: float) -> float:
    _check_modulus(k)
    a_seq, c_seq = _agm_scale(k)
    s = 0.0
    for n, c in enumerate(c_seq):
        s += 2.0 ** (n - 1) * c * c
    K = math.pi / (2.0 * a_seq[-1])
    return K * (1.0 - s)


def _phi_descend(u: float, a_seq, c_seq) -> list:
    """Backward amplitude recursion; returns [phi_0, phi_1, ...]."""
    n = len(a_seq) - 1
    phi = [0.0] * (n + 1)
    phi[n] = (2.0 ** n) * a_seq[n] * u
    for i in range(n, 0, -1):
        ratio = c_seq[i] * math.sin(phi[i]) / a_seq[i]
        ratio = min(1.0, max(-1.0, ratio))
        phi[i - 1] = 0.5 * (phi[i] + math.asin(ratio))
    return phi


def _reduce_argument(u: float, K: float):
    """Fold u into [0, K] using the sn/cn/dn symmetries.

    Returns (u_reduced, sn_sign, cn_sign); dn is unaffected.
    """
    period = 4.0 * K
    u = math.fmod(u, period)
    if u < 0.0:
        u += period
    sn_sign = 1.0
    cn_sign = 1.0
    if u > 2.0 * K:
        u -= 2.0 * K
        sn_sign = -sn_sign
        cn_sign = -cn_sign
    if u > K:
        u = 2.0 * K - u
        cn_sign = -cn_sign
    return u, sn_sign, cn_sign


def jacobi_sn_cn_dn(u: float, k: float):
    """sn, cn, dn with modulus k, for any real argument."""
    _check_modulus(k)
    if k < 1e-12:
        return math.sin(u), math.cos(u), 1.0
    a_seq, c_seq = _agm_scale(k)
    K = math.pi / (2.0 * a_seq[-1])
    ur, s_sn, s_cn = _reduce_argument(u, K)
    phi = _phi_descend(ur, a_seq, c_seq)
    sn = math.sin(phi[0])
    cn = math.cos(phi[0])
    denom = math.cos(phi[1] - phi[0])
    dn = cn / denom if abs(denom) > 1e-300 else 1.0
    # guard rounding drift at the fold points
    sn = min(1.0, max(-1.0, sn))
    cn = min(1.0, max(-1.0, cn))
    return s_sn * sn, s_cn * cn, dn


def jacobi_zeta(u: float, k: float) -> float:
    """Jacobi zeta; quasi-periodic with Z(u + 2K) = Z(u) and odd in u."""
    _check_modulus(k)
    if k < 1e-12:
        return 0.0
    a_seq, c_seq = _agm_scale(k)
    K = math.pi / (2.0 * a_seq[-1])
    period = 2.0 * K
    ur = math.fmod(u, period)
    if ur > K:
        ur -= period
    elif ur < -K:
        ur += period
    sign = 1.0
    if ur < 0.0:
        ur = -ur
        sign = -1.0
    phi = _phi_descend(ur, a_seq, c_seq)
    z = 0.0
    for i in range(1, len(phi)):
        z += c_seq[i] * math.sin(phi[i])
    return sign * z


def jacobi_am(u: float, k: float) -> float:
    """Jacobi amplitude am(u, k) for |u| <= K (enough for inversion seeds)."""
    _check_modulus(k)
    if k < 1e-12:
        return u
    a_seq, c_seq = _agm_scale(k)
    phi = _phi_descend(u, a_seq, c_seq)
    return phi[0]


def incomplete_F(phi: float, k: float) -> float:
    """Incomplete elliptic integral of the first kind via the ascending
    amplitude AGM recursion (valid for all real amplitudes)."""
    _check_modulus(k)
    if k < 1e-12:
        return phi
    a = 1.0
    b = math.sqrt(1.0 - k * k)
    phi_n = phi
    scale = 1.0
    for _ in range(_MAX_ITERS):
        m = math.floor(phi_n / math.pi + 0.5)
        r = phi_n - m * math.pi
        phi_n = phi_n + m * math.pi + math.atan((b / a) * math.tan(r))
        an = 0.5 * (a + b)
        bn = math.sqrt(a * b)
        scale *= 0.5
        a, b = an, bn
        if abs(a - b) < AGM_TOL:
            break
    return scale * phi_n / a


def inverse_sn_cn(sn_val: float, cn_val: float, k: float) -> float:
    """The argument u in [0, 4K) with sn(u) = sn_val and cn(u) = cn_val."""
    _check_modulus(k)
    phi = math.atan2(sn_val, cn_val)
    u = incomplete_F(phi, k)
    period = 4.0 * elliptic_K(k)
    u = math.fmod(u, period)
    if u < 0.0:
        u += period
    return u
