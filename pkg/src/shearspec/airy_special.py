"""Complex Airy function and its relatives.

Ai and Ai' come from the Maclaurin series (two hypergeometric branches,
summed in double-double arithmetic so that cancellation up to |z| ~ 10 is
harmless) for |z| <= 9 and from the large-argument expansions beyond, with
the connection formula Ai(z) = e^{i pi/3} Ai(-z e^{i pi/3}) +
e^{-i pi/3} Ai(-z e^{-i pi/3}) used near the negative axis.

The integral J(w) = int_w^oo Ai(s) ds gives the generalized Airy function
A0(z) = J(e^{i pi/6} z) and the auxiliary function psi(x) = J(-x). Also here:
the normalized profile Psi_lambda, the Laplace-type integral F(lambda, theta),
the boundary-layer profiles psi_+-, an argument-principle zero finder and
the constants nu_1 and theta_1^r.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

__all__ = [
    "AI0",
    "AIP0",
    "PoleProximityError",
    "ZeroSet",
    "SpecialConstants",
    "airy_ai",
    "airy_aip",
    "airy_pair",
    "airy_ai_series",
    "airy_ai_asymptotic",
    "airy_int",
    "a0",
    "a0_prime",
    "a0_quadrature",
    "psi_aux",
    "psi_cap",
    "psi_cap_norms",
    "f_laplace",
    "f_laplace_dlambda",
    "LaplaceEvaluator",
    "psi_pm",
    "real_airy_zeros",
    "zeros_in_region",
    "constants",
]

SQRT_PI = math.sqrt(math.pi)
AI0 = 0.3550280538878172
AIP0 = -0.2588194037928068
_C1_HI, _C1_LO = 0.3550280538878172, 2.05233632436212e-17
_C2_HI, _C2_LO = 0.2588194037928068, -2.522243111610832e-17
SERIES_RADIUS = 9.0
E_PI6 = np.exp(1j * np.pi / 6)
E_2PI3 = np.exp(2j * np.pi / 3)
E_PI3 = np.exp(1j * np.pi / 3)


class PoleProximityError(ZeroDivisionError):
    """Denominator A0(i lambda) too close to zero."""

    def __init__(self, lam, value):
        super().__init__(f"|A0(i*lambda)| = {abs(value):.3e} at lambda = {lam}")
        self.lam = lam
        self.value = value



# --------------------------------------------------------------------------
# asymptotic coefficients


def _asym_coeffs(kmax: int = 80):
    u = np.zeros(kmax + 1)
    v = np.zeros(kmax + 1)
    u[0] = v[0] = 1.0
    for k in range(1, kmax + 1):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
        v[k] = -u[k] * (6 * k + 1) / (6 * k - 1)
    # integral expansion: ut_n = sum_k u_k (k + 1/2)_{n-k}
    ut = np.zeros(kmax + 1)
    for n in range(kmax + 1):
        s = 0.0
        for k in range(n + 1):
            poch = 1.0
            for j in range(n - k):
                poch *= k + 0.5 + j
            s += u[k] * poch
        ut[n] = s
    return u, v, ut


_U, _V, _UT = _asym_coeffs()

# --------------------------------------------------------------------------
# double-double arithmetic (real pairs; complex values as 4 floats)


@njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@njit(cache=True, inline="always")
def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@njit(cache=True, inline="always")
def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


@njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


@njit(cache=True, inline="always")
def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    e += al + bl
    return _quick_two_sum(s, e)


@njit(cache=True, inline="always")
def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e += ah * bl + al * bh
    return _quick_two_sum(p, e)


@njit(cache=True, inline="always")
def _dd_div_int(ah, al, m):
    q1 = ah / m
    p, e = _two_prod(q1, m)
    s, f = _two_sum(ah, -p)
    f -= e
    f += al
    q2 = (s + f) / m
    return _quick_two_sum(q1, q2)


@njit(cache=True, inline="always")
def _cdd_mul(a0, a1, a2, a3, b0, b1, b2, b3):
    # (a0+a1) + i(a2+a3) times (b0+b1) + i(b2+b3)
    rr0, rr1 = _dd_mul(a0, a1, b0, b1)
    ii0, ii1 = _dd_mul(a2, a3, b2, b3)
    ri0, ri1 = _dd_mul(a0, a1, b2, b3)
    ir0, ir1 = _dd_mul(a2, a3, b0, b1)
    re0, re1 = _dd_add(rr0, rr1, -ii0, -ii1)
    im0, im1 = _dd_add(ri0, ri1, ir0, ir1)
    return re0, re1, im0, im1


@njit(cache=True, inline="always")
def _cdd_div_int(a0, a1, a2, a3, m):
    r0, r1 = _dd_div_int(a0, a1, m)
    i0, i1 = _dd_div_int(a2, a3, m)
    return r0, r1, i0, i1


@njit(cache=True, inline="always")
def _cdd_add(a0, a1, a2, a3, b0, b1, b2, b3):
    r0, r1 = _dd_add(a0, a1, b0, b1)
    i0, i1 = _dd_add(a2, a3, b2, b3)
    return r0, r1, i0, i1


@njit(cache=True)
def _series_kernel(z):
    """Maclaurin sums: returns (Ai, Ai', int_0^z Ai) in double precision."""
    zr = z.real
    zi = z.imag
    # z^2 and z^3 in double-double
    z2 = _cdd_mul(zr, 0.0, zi, 0.0, zr, 0.0, zi, 0.0)
    z3 = _cdd_mul(z2[0], z2[1], z2[2], z2[3], zr, 0.0, zi, 0.0)
    # f terms t_k (start 1), g terms s_k (start z)
    t = (1.0, 0.0, 0.0, 0.0)
    s = (zr, 0.0, zi, 0.0)
    f = t
    g = s
    # derivative sums: f' = sum_{k>=1} t_{k-1} z^2/(3k-1); g' = 1 + sum_{k>=1} s_{k-1} z^2/(3k)
    fp = (0.0, 0.0, 0.0, 0.0)
    gp = (1.0, 0.0, 0.0, 0.0)
    # integral sums: F = sum t_k z/(3k+1); G = sum s_k z/(3k+2)
    tz = _cdd_mul(t[0], t[1], t[2], t[3], zr, 0.0, zi, 0.0)
    F = tz
    sz = _cdd_mul(s[0], s[1], s[2], s[3], zr, 0.0, zi, 0.0)
    G = _cdd_div_int(sz[0], sz[1], sz[2], sz[3], 2.0)
    tmax = 1.0
    for k in range(1, 200):
        tp = _cdd_mul(t[0], t[1], t[2], t[3], z2[0], z2[1], z2[2], z2[3])
        tp = _cdd_div_int(tp[0], tp[1], tp[2], tp[3], 3.0 * k - 1.0)
        fp = _cdd_add(fp[0], fp[1], fp[2], fp[3], tp[0], tp[1], tp[2], tp[3])
        sp = _cdd_mul(s[0], s[1], s[2], s[3], z2[0], z2[1], z2[2], z2[3])
        sp = _cdd_div_int(sp[0], sp[1], sp[2], sp[3], 3.0 * k)
        gp = _cdd_add(gp[0], gp[1], gp[2], gp[3], sp[0], sp[1], sp[2], sp[3])

        t = _cdd_mul(t[0], t[1], t[2], t[3], z3[0], z3[1], z3[2], z3[3])
        t = _cdd_div_int(t[0], t[1], t[2], t[3], (3.0 * k - 1.0) * (3.0 * k))
        s = _cdd_mul(s[0], s[1], s[2], s[3], z3[0], z3[1], z3[2], z3[3])
        s = _cdd_div_int(s[0], s[1], s[2], s[3], (3.0 * k) * (3.0 * k + 1.0))
        f = _cdd_add(f[0], f[1], f[2], f[3], t[0], t[1], t[2], t[3])
        g = _cdd_add(g[0], g[1], g[2], g[3], s[0], s[1], s[2], s[3])
        tz = _cdd_mul(t[0], t[1], t[2], t[3], zr, 0.0, zi, 0.0)
        tz = _cdd_div_int(tz[0], tz[1], tz[2], tz[3], 3.0 * k + 1.0)
        F = _cdd_add(F[0], F[1], F[2], F[3], tz[0], tz[1], tz[2], tz[3])
        sz = _cdd_mul(s[0], s[1], s[2], s[3], zr, 0.0, zi, 0.0)
        sz = _cdd_div_int(sz[0], sz[1], sz[2], sz[3], 3.0 * k + 2.0)
        G = _cdd_add(G[0], G[1], G[2], G[3], sz[0], sz[1], sz[2], sz[3])
        mag = abs(t[0]) + abs(t[2]) + abs(s[0]) + abs(s[2])
        if mag > tmax:
            tmax = mag
        if mag < 1e-34 * tmax and k > 3:
            break
    ai = _lin(f, g)
    aip = _lin(fp, gp)
    iai = _lin(F, G)
    return ai, aip, iai


@njit(cache=True, inline="always")
def _lin(f, g):
    # c1 f - c2 g in double-double, rounded to complex
    a = _cdd_mul(f[0], f[1], f[2], f[3], _C1_HI, _C1_LO, 0.0, 0.0)
    b = _cdd_mul(g[0], g[1], g[2], g[3], _C2_HI, _C2_LO, 0.0, 0.0)
    r = _cdd_add(a[0], a[1], a[2], a[3], -b[0], -b[1], -b[2], -b[3])
    return complex(r[0] + r[1], r[2] + r[3])


@njit(cache=True)
def _asym_sum(coef, zeta, sign):
    """Optimally truncated sum_k sign^k coef_k zeta^{-k}."""
    s = 0.0j
    term_prev = np.inf
    p = 1.0 + 0.0j
    inv = 1.0 / zeta
    for k in range(coef.shape[0]):
        term = coef[k] * p
        a = abs(term)
        if k > 2 and a > term_prev:
            break
        s += term
        if a < 1e-18 * abs(s):
            break
        term_prev = a
        p *= sign * inv
    return s


@njit(cache=True)
def _asym_sector(z, U, V):
    """Ai, Ai' from the decaying-sector expansion, valid for |arg z| <= 2pi/3."""
    sq = np.sqrt(z)
    zeta = (2.0 / 3.0) * z * sq
    q = np.sqrt(sq)  # z^{1/4}
    e = np.exp(-zeta)
    pre = e / (2.0 * SQRT_PI * q)
    su = _asym_sum(U, zeta, -1.0)
    sv = _asym_sum(V, zeta, -1.0)
    return pre * su, -q * e / (2.0 * SQRT_PI) * sv


@njit(cache=True)
def _asym_full(z, U, V):
    if abs(np.angle(z)) <= 2.0 * np.pi / 3.0:
        return _asym_sector(z, U, V)
    ep = np.exp(1j * np.pi / 3.0)
    em = np.exp(-1j * np.pi / 3.0)
    a1, d1 = _asym_sector(-z * ep, U, V)
    a2, d2 = _asym_sector(-z * em, U, V)
    ai = ep * a1 + em * a2
    aip = -ep * ep * d1 - em * em * d2
    return ai, aip


@njit(cache=True)
def _airy_scalar(z, U, V):
    if abs(z) <= SERIES_RADIUS:
        ai, aip, _ = _series_kernel(z)
        return ai, aip
    return _asym_full(z, U, V)


@njit(cache=True)
def _int_asym_sector(w, UT):
    sq = np.sqrt(w)
    zeta = (2.0 / 3.0) * w * sq
    q3 = sq * np.sqrt(sq)  # w^{3/4}
    return np.exp(-zeta) / (2.0 * SQRT_PI * q3) * _asym_sum(UT, zeta, -1.0)


@njit(cache=True)
def _int_scalar(w, UT):
    """J(w) = int_w^oo Ai(s) ds along paths ending in the decaying sector."""
    if abs(w) <= SERIES_RADIUS:
        _, _, iai = _series_kernel(w)
        return 1.0 / 3.0 - iai
    if abs(np.angle(w)) <= 2.0 * np.pi / 3.0:
        return _int_asym_sector(w, UT)
    ep = np.exp(1j * np.pi / 3.0)
    em = np.exp(-1j * np.pi / 3.0)
    return 1.0 - _int_asym_sector(-w * ep, UT) - _int_asym_sector(-w * em, UT)


@njit(cache=True)
def _airy_vec(z, U, V, out_ai, out_aip):
    for i in range(z.shape[0]):
        a, b = _airy_scalar(z[i], U, V)
        out_ai[i] = a
        out_aip[i] = b


@njit(cache=True)
def _series_vec(z, out_ai, out_aip):
    for i in range(z.shape[0]):
        a, b, _ = _series_kernel(z[i])
        out_ai[i] = a
        out_aip[i] = b


@njit(cache=True)
def _asym_vec(z, U, V, out_ai, out_aip):
    for i in range(z.shape[0]):
        a, b = _asym_full(z[i], U, V)
        out_ai[i] = a
        out_aip[i] = b


@njit(cache=True)
def _int_vec(w, UT, out):
    for i in range(w.shape[0]):
        out[i] = _int_scalar(w[i], UT)


def _apply_pair(kernel, z, *extra):
    z = np.asarray(z, dtype=complex)
    flat = np.ascontiguousarray(z.ravel())
    a = np.empty_like(flat)
    b = np.empty_like(flat)
    kernel(flat, *extra, a, b)
    if z.ndim == 0:
        return complex(a[0]), complex(b[0])
    return a.reshape(z.shape), b.reshape(z.shape)


def airy_pair(z):
    """``(Ai(z), Ai'(z))`` for scalar or array complex input."""
    return _apply_pair(_airy_vec, z, _U, _V)


def airy_ai(z):
    """Airy function Ai(z) of a complex argument."""
    return airy_pair(z)[0]


def airy_aip(z):
    """Derivative Ai'(z)."""
    return airy_pair(z)[1]


def airy_ai_series(z):
    """Maclaurin branch only (any |z|; intended for |z| <= 10)."""
    return _apply_pair(_series_vec, z)[0]


def airy_ai_asymptotic(z):
    """Large-argument branch only (intended for |z| >= 8)."""
    return _apply_pair(_asym_vec, z, _U, _V)[0]


def airy_int(w):
    """``J(w) = int_w^infinity Ai(s) ds`` (entire in w)."""
    w = np.asarray(w, dtype=complex)
    flat = np.ascontiguousarray(w.ravel())
    out = np.empty_like(flat)
    _int_vec(flat, _UT, out)
    return complex(out[0]) if w.ndim == 0 else out.reshape(w.shape)


def a0(z):
    """``A0(z) = e^{i pi/6} int_z^oo Ai(e^{i pi/6} t) dt``, via ``J(e^{i pi/6} z)``."""
    return airy_int(E_PI6 * np.asarray(z, dtype=complex))


def a0_prime(z):
    """``A0'(z) = -e^{i pi/6} Ai(e^{i pi/6} z)``."""
    return -E_PI6 * airy_ai(E_PI6 * np.asarray(z, dtype=complex))


def psi_aux(x):
    """``psi(x) = int_{-oo}^x Ai(-t) dt = J(-x)``."""
    return airy_int(-np.asarray(x, dtype=complex))


@lru_cache(maxsize=8)
def _gauss_legendre(m: int):
    return np.polynomial.legendre.leggauss(m)


def a0_quadrature(z: complex, panel: float = 0.5, order: int = 20, reach: float = 14.0) -> complex:
    """A0(z) by composite Gauss-Legendre along t in [z, z+T] plus an asymptotic tail.

    T is chosen so that ``e^{i pi/6}(z+T)`` lies deep in the decaying sector,
    where the tail ``int_{w}^oo Ai`` is taken from its large-argument
    expansion alone. Independent of the series route used by :func:`a0`.
    """
    z = complex(z)
    T = max(reach - z.real, 0.0) + reach
    npan = int(np.ceil(T / panel))
    h = T / npan
    xg, wg = _gauss_legendre(order)
    starts = z + h * np.arange(npan)
    nodes = (starts[:, None] + 0.5 * h * (xg[None, :] + 1.0)).ravel()
    vals = airy_ai(E_PI6 * nodes).reshape(npan, order)
    integral = E_PI6 * 0.5 * h * np.sum(vals * wg[None, :])
    w_end = E_PI6 * (z + T)
    tail = complex(_int_asym_sector(w_end, _UT))
    return integral + tail


# --------------------------------------------------------------------------
# normalized profiles and Laplace-type integral


def _bracket(lam) -> float:
    return float(np.sqrt(1.0 + abs(lam) ** 2))


def psi_cap(lam: complex, x):
    """``Psi_lambda(x) = Ai(e^{i pi/6}(x + i lambda)) / A0(i lambda)``."""
    den = a0(1j * lam)
    if abs(den) < 1e-13:
        raise PoleProximityError(lam, den)
    x = np.asarray(x, dtype=float)
    return airy_ai(E_PI6 * (x + 1j * lam)) / den


def _half_line_nodes(x_max: float, panel: float = 0.5, order: int = 20):
    npan = int(np.ceil(x_max / panel))
    h = x_max / npan
    xg, wg = _gauss_legendre(order)
    starts = h * np.arange(npan)
    nodes = (starts[:, None] + 0.5 * h * (xg[None, :] + 1.0)).ravel()
    weights = np.tile(0.5 * h * wg, npan)
    return nodes, weights


def psi_cap_norms(lam: complex, x_max: Optional[float] = None, kmax: int = 4) -> dict:
    """Moments of Psi_lambda on the half line.

    Returns ``l2[k] = ||x^k Psi||_2`` (k = 0..kmax), ``l1[s] = ||x^s Psi||_1``
    (s = 0..3), ``linf[s] = ||x^s Psi||_inf`` (s = 0..4) and ``at0 = Psi(0)``.
    Integrals use composite Gauss-Legendre on [0, X_max], X_max = 40 + 2|lambda|.
    """
    if x_max is None:
        x_max = 40.0 + 2.0 * abs(lam)
    nodes, weights = _half_line_nodes(x_max)
    vals = psi_cap(lam, nodes)
    a = np.abs(vals)
    l2 = [float(np.sqrt(np.sum(weights * (nodes**k * a) ** 2))) for k in range(kmax + 1)]
    l1 = [float(np.sum(weights * nodes**s * a)) for s in range(4)]
    fine = np.linspace(0.0, x_max, 20001)
    af = np.abs(psi_cap(lam, fine))
    linf = [float(np.max(fine**s * af)) for s in range(5)]
    return {"l2": l2, "l1": l1, "linf": linf, "at0": complex(psi_cap(lam, 0.0))}


_GLX, _GLW = np.polynomial.legendre.leggauss(20)
_GLX12, _GLW12 = np.polynomial.legendre.leggauss(12)


@njit(cache=True)
def _f_laplace_scalar(lam, theta, x_max, U, V, glx, glw):
    c = np.exp(1j * np.pi / 6.0)
    h = 1.0
    npan = int(np.ceil(x_max / h))
    total = 0.0j
    for p in range(npan):
        a = p * h
        b = min(a + h, x_max)
        hh = b - a
        acc = 0.0j
        for j in range(glx.shape[0]):
            x = a + 0.5 * hh * (glx[j] + 1.0)
            ai, _ = _airy_scalar(c * (x + 1j * lam), U, V)
            acc += glw[j] * np.exp(-theta * x) * ai
        total += 0.5 * hh * acc
        # certified tail: |int_b^oo| <= |Ai(z_b)| e^{-theta b} / (Re(c sqrt(z_b)) + theta)
        zb = c * (b + 1j * lam)
        if b > 4.0 + max(0.0, -lam.imag) and abs(np.angle(zb)) < np.pi / 3.0:
            aib, _ = _airy_scalar(zb, U, V)
            rate = (c * np.sqrt(zb)).real + theta
            if rate > 0.5:
                tail = abs(aib) * np.exp(-theta * b) / rate
                if tail < 1e-18 * max(abs(total), 1e-300) or tail < 1e-300:
                    break
    return total


@njit(cache=True)
def _f_laplace_vec(lam, theta, U, V, glx, glw, out):
    for i in range(lam.shape[0]):
        xm = 40.0 + 2.0 * abs(lam[i])
        out[i] = _f_laplace_scalar(lam[i], theta, xm, U, V, glx, glw)


def f_laplace(lam, theta: float):
    """``F(lambda, theta) = int_0^oo e^{-theta x} Ai(e^{i pi/6}(x + i lambda)) dx``.

    Composite 20-point Gauss-Legendre panels of unit length on [0, X_max]
    with X_max = 40 + 2|lambda|, stopped early once the asymptotic tail
    bound falls below 1e-18 of the accumulated value.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    lam = np.asarray(lam, dtype=complex)
    flat = np.ascontiguousarray(lam.ravel())
    out = np.empty_like(flat)
    _f_laplace_vec(flat, float(theta), _U, _V, _GLX, _GLW, out)
    return complex(out[0]) if lam.ndim == 0 else out.reshape(lam.shape)


def f_laplace_dlambda(lam, theta: float, F=None):
    """``dF/dlambda = -i Ai(e^{2 i pi/3} lambda) + i theta F``."""
    lam = np.asarray(lam, dtype=complex)
    if F is None:
        F = f_laplace(lam, theta)
    return -1j * airy_ai(E_2PI3 * lam) + 1j * theta * F


@njit(cache=True)
def _f_from_anchor_vec(lam, anc, fa, theta, U, V, glx, glw, out):
    e23 = np.exp(2j * np.pi / 3.0)
    for i in range(lam.shape[0]):
        d = lam[i] - anc[i]
        acc = 0.0j
        for j in range(glx.shape[0]):
            t = 0.5 * (glx[j] + 1.0)
            s = anc[i] + t * d
            ai, _ = _airy_scalar(e23 * s, U, V)
            acc += glw[j] * np.exp(1j * theta * (1.0 - t) * d) * ai
        out[i] = np.exp(1j * theta * d) * fa[i] - 1j * 0.5 * d * acc


class LaplaceEvaluator:
    """Fast F(., theta) for dense point sets.

    F is computed by direct quadrature at lattice anchors (spacing
    ``min(0.5, 1/theta)``, cached) and carried to each requested point by the
    exact relation ``F(z) = e^{i theta (z-a)} F(a) - i int_a^z e^{i theta (z-s)}
    Ai(e^{2 i pi/3} s) ds`` on the straight segment from the nearest anchor.
    The segment integral uses 12-point Gauss-Legendre; segments are shorter
    than 0.36, so the homogeneous factor never amplifies errors by more
    than e^{0.71}.
    """

    def __init__(self, theta: float, spacing: Optional[float] = None):
        if theta < 0:
            raise ValueError("theta must be non-negative")
        self.theta = float(theta)
        self.h = float(spacing) if spacing else min(0.5, 1.0 / max(self.theta, 1e-300))
        self._cache: dict = {}
        self._last = (None, None)

    def _anchors(self, keys):
        missing = [k for k in set(keys) if k not in self._cache]
        if missing:
            pts = np.array([complex(a * self.h, b * self.h) for a, b in missing])
            vals = f_laplace(pts, self.theta)
            for k, v in zip(missing, np.atleast_1d(vals)):
                self._cache[k] = complex(v)
        return np.array([self._cache[k] for k in keys], dtype=complex)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        flat = np.ascontiguousarray(lam.ravel())
        kr = np.rint(flat.real / self.h).astype(np.int64)
        ki = np.rint(flat.imag / self.h).astype(np.int64)
        keys = list(zip(kr.tolist(), ki.tolist()))
        fa = self._anchors(keys)
        anc = (kr + 1j * ki) * self.h
        out = np.empty_like(flat)
        _f_from_anchor_vec(flat, anc, fa, self.theta, _U, _V, _GLX12, _GLW12, out)
        self._last = (flat.tobytes(), out)
        return complex(out[0]) if lam.ndim == 0 else out.reshape(lam.shape)

    def derivative(self, lam, F=None):
        lam = np.asarray(lam, dtype=complex)
        if F is None:
            key, val = self._last
            flat = np.ascontiguousarray(lam.ravel())
            if key is not None and key == flat.tobytes():
                F = val.reshape(lam.shape)
            else:
                F = self(lam)
        return -1j * airy_ai(E_2PI3 * lam) + 1j * self.theta * F


def psi_pm(side: str, x, beta: float, lam: complex, u_wall: float, j_wall: float):
    """Boundary-layer profile attached to the wall x = -1 (side '-') or x = +1 ('+').

    side '-': ``e^{i pi/6} Psi_{lt}((J beta)^{1/3} (1 + x))`` with
    ``lt = beta^{1/3} J^{-2/3} (lambda - i U(-1))``; it solves
    ``-psi'' + i beta (U(-1) + J (1 + x)) psi = beta lambda psi`` and
    integrates to ``(J beta)^{-1/3}`` over [-1, oo).

    side '+': ``conj(e^{i pi/6} Psi_{conj(lt)}((J beta)^{1/3} (1 - x)))`` with
    ``lt = beta^{1/3} J^{-2/3} (lambda - i U(1))``; it solves
    ``-psi'' + i beta (U(1) + J (x - 1)) psi = beta lambda psi`` and
    integrates to ``(J beta)^{-1/3}`` over (-oo, 1].
    """
    if j_wall <= 0:
        raise ValueError("wall shear must be positive")
    x = np.asarray(x, dtype=float)
    scale = (j_wall * beta) ** (1.0 / 3.0)
    lt = beta ** (1.0 / 3.0) * j_wall ** (-2.0 / 3.0) * (lam - 1j * u_wall)
    if side == "-":
        return E_PI6 * psi_cap(lt, scale * (1.0 + x))
    if side == "+":
        return np.conj(E_PI6 * psi_cap(np.conj(lt), scale * (1.0 - x)))
    raise ValueError("side must be '+' or '-'")


# --------------------------------------------------------------------------
# real Airy zeros


def real_airy_zeros(k: int, tol: float = 1e-15) -> np.ndarray:
    """First ``k`` zeros of Ai on the negative axis by sign scanning and bisection."""
    zeros = []
    step = 0.05
    a = 0.0
    fa = airy_ai(complex(a)).real
    while len(zeros) < k:
        b = a - step
        fb = airy_ai(complex(b)).real
        if fa == 0.0:
            zeros.append(a)
        elif fa * fb < 0:
            lo, hi, flo = b, a, fb
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fm = airy_ai(complex(mid)).real
                if fm == 0.0:
                    lo = hi = mid
                    break
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
                if hi - lo < tol * max(1.0, abs(mid)):
                    break
            zeros.append(0.5 * (lo + hi))
        a, fa = b, fb
    return np.array(zeros)


# --------------------------------------------------------------------------
# argument-principle zero finder


@dataclass
class ZeroSet:
    """Refined zeros with per-cell winding counts.

    ``cells`` holds ``((xmin, xmax, ymin, ymax), winding)`` for every leaf cell
    that carried a zero; ``winding_total`` is the count on the outer
    rectangle; ``residual`` is ``max |f(z)| / scale`` at the reported zeros,
    ``scale`` being the largest |f| sampled on the owning cell boundary.
    """

    zeros: np.ndarray
    cells: list
    residual: float
    winding_total: int
    flagged: list = field(default_factory=list)
    rect: tuple = ()

    @property
    def complete(self) -> bool:
        return (not self.flagged) and sum(w for _, w in self.cells) == self.winding_total == len(self.zeros)

    def to_json(self) -> str:
        return json.dumps(
            {
                "zeros": [[_f17(z.real), _f17(z.imag)] for z in self.zeros],
                "winding_total": int(self.winding_total),
                "residual": _f17(self.residual),
            }
        )


def _f17(v: float) -> float:
    return float(f"{float(v):.17g}")


def _cauchy_derivative(f, z, r):
    m = 16
    ang = np.exp(2j * np.pi * np.arange(m) / m)
    z = np.asarray(z, dtype=complex)
    pts = z[..., None] + r * ang
    vals = f(pts.ravel()).reshape(pts.shape)
    return np.sum(vals / ang, axis=-1) / (m * r)


def _perimeter(rect, m):
    x0, x1, y0, y1 = rect
    t = np.arange(m) / m
    c = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    pts = []
    dz = []
    for k in range(4):
        a, b = c[k], c[(k + 1) % 4]
        pts.append(a + (b - a) * t)
        dz.append(np.full(m, (b - a) / m))
    return np.concatenate(pts), np.concatenate(dz), c


def _winding(f, fprime, rect, m):
    """Winding number of f around rect by f'/f trapezoid and by phase increments."""
    pts, dz, corners = _perimeter(rect, m)
    fv = f(pts)
    if fprime is not None:
        dv = fprime(pts)
    else:
        size = min(rect[1] - rect[0], rect[3] - rect[2])
        dv = _cauchy_derivative(f, pts, 1e-3 * size)
    minf = float(np.min(np.abs(fv)))
    if not minf > 0:
        return complex(np.nan), np.nan, float(np.max(np.abs(fv))), minf
    # trapezoid: nodes at corners shared between two edges with different dz
    g = dv / fv
    dz_prev = np.roll(dz, 1)
    is_corner = (np.arange(pts.size) % m) == 0
    weight = np.where(is_corner, 0.5 * (dz + dz_prev), dz)
    w_int = np.sum(g * weight) / (2j * np.pi)
    ratio = np.roll(fv, -1) / fv
    w_phase = np.sum(np.angle(ratio)) / (2 * np.pi)
    scale = float(np.max(np.abs(fv)))
    return w_int, w_phase, scale, minf


def _newton(f, fprime, z0, tol=1e-12, maxit=60):
    z = complex(z0)
    for _ in range(maxit):
        fz = complex(f(np.array([z]))[0])
        dz_ = complex(fprime(np.array([z]))[0]) if fprime is not None else complex(
            _cauchy_derivative(f, np.array([z]), 1e-4 * max(1.0, abs(z)))[0]
        )
        if dz_ == 0:
            return z, False
        step = fz / dz_
        z -= step
        if abs(step) <= 1e-15 * max(1.0, abs(z)) or abs(fz) <= tol * 1e-6:
            return z, True
    return z, abs(step) <= 1e-10 * max(1.0, abs(z))


def zeros_in_region(
    f: Callable,
    rect: Sequence[float],
    fprime: Optional[Callable] = None,
    max_depth: int = 10,
    samples: int = 512,
    newton_tol: float = 1e-12,
) -> ZeroSet:
    """Zeros of an analytic ``f`` inside ``rect = (xmin, xmax, ymin, ymax)``.

    ``f`` (and ``fprime`` when given) must accept 1-d complex arrays. Each
    cell's winding number is computed from ``f'/f`` by the trapezoid rule
    with ``samples`` points per edge and cross-checked against accumulated
    phase increments; a non-integer count doubles the sampling, and a
    persistent failure (zero on the boundary) jitters the cell. Cells with
    winding one are refined by Newton from their centre; larger counts are
    split into quadrants until ``max_depth``.
    """
    rect = tuple(float(v) for v in rect)

    def count(r, m=samples):
        for attempt in range(4):
            wi, wp, scale, minf = _winding(f, fprime, r, m)
            if not (np.isfinite(wi) and np.isfinite(wp)):
                return None, scale
            k = int(round(wp))
            if abs(wi - round(wi.real)) < 0.05 and abs(wp - k) < 0.05 and round(wi.real) == k:
                return k, scale
            m *= 2
        return None, scale

    def jitter(r, depth):
        x0, x1, y0, y1 = r
        dx = (x1 - x0) * 1e-3 * (1 + depth)
        dy = (y1 - y0) * 1e-3 * (1 + depth)
        return (x0 - dx, x1 + 0.7 * dx, y0 - 0.6 * dy, y1 + dy)

    top = rect
    total = None
    for j in range(4):
        total, top_scale = count(top)
        if total is not None:
            break
        top = jitter(top, j)
    if total is None:
        raise RuntimeError("winding number on the outer rectangle is not an integer")

    zeros: list = []
    cells: list = []
    flagged: list = []
    residuals: list = []

    def inside(z, r, pad):
        x0, x1, y0, y1 = r
        px = pad * (x1 - x0)
        py = pad * (y1 - y0)
        return (x0 - px <= z.real <= x1 + px) and (y0 - py <= z.imag <= y1 + py)

    def split_point(r, frac):
        x0, x1, y0, y1 = r
        return x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)

    def recurse(r, k, scale, depth):
        if k == 0:
            return
        if k == 1:
            c = complex(0.5 * (r[0] + r[1]), 0.5 * (r[2] + r[3]))
            z, ok = _newton(f, fprime, c, newton_tol)
            if ok and inside(z, r, 1e-9):
                zeros.append(z)
                cells.append((r, 1))
                residuals.append(abs(complex(f(np.array([z]))[0])) / max(scale, 1e-300))
                return
        if depth >= max_depth:
            flagged.append((r, k))
            return
        for frac in (0.5, 0.4937, 0.5129):
            xm, ym = split_point(r, frac)
            subs = [(r[0], xm, r[2], ym), (xm, r[1], r[2], ym), (r[0], xm, ym, r[3]), (xm, r[1], ym, r[3])]
            counts = [count(s) for s in subs]
            if all(c[0] is not None for c in counts) and sum(c[0] for c in counts) == k:
                for s, (kk, sc) in zip(subs, counts):
                    recurse(s, kk, sc, depth + 1)
                return
        flagged.append((r, k))

    recurse(top, total, top_scale, 0)
    order = sorted(range(len(zeros)), key=lambda i: (round(zeros[i].real, 12), zeros[i].imag))
    zs = np.array([zeros[i] for i in order], dtype=complex)
    cl = [cells[i] for i in order]
    return ZeroSet(
        zeros=zs,
        cells=cl,
        residual=float(max(residuals)) if residuals else 0.0,
        winding_total=int(total),
        flagged=flagged,
        rect=top,
    )


# --------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class SpecialConstants:
    nu1: complex
    theta1r: float
    airy_zeros: tuple
    theta1: complex = 0j

    def to_dict(self) -> dict:
        return {
            "nu1": [_f17(self.nu1.real), _f17(self.nu1.imag)],
            "theta1r": _f17(self.theta1r),
            "airy_zeros": [_f17(w) for w in self.airy_zeros],
        }


def _ai_rot(lam):
    return airy_ai(E_2PI3 * np.asarray(lam, dtype=complex))


def _ai_rot_prime(lam):
    return E_2PI3 * airy_aip(E_2PI3 * np.asarray(lam, dtype=complex))


def _a0i(z):
    return a0(1j * np.asarray(z, dtype=complex))


def _a0i_prime(z):
    return 1j * a0_prime(1j * np.asarray(z, dtype=complex))


A0_WINDOW = (-0.5, 12.0, -0.5, 12.0)
DIRICHLET_WINDOW = (-1.0, 4.0, -1.0, 4.0)


@lru_cache(maxsize=1)
def a0_zero_set() -> ZeroSet:
    """Zeros of ``z -> A0(i z)`` in the default window [-0.5, 12]^2."""
    return zeros_in_region(_a0i, A0_WINDOW, fprime=_a0i_prime)


@lru_cache(maxsize=1)
def dirichlet_zero_set() -> ZeroSet:
    """Zeros of ``lambda -> Ai(e^{2 i pi/3} lambda)`` near the origin."""
    return zeros_in_region(_ai_rot, DIRICHLET_WINDOW, fprime=_ai_rot_prime)


@lru_cache(maxsize=1)
def constants(n_airy: int = 6) -> SpecialConstants:
    """nu_1 (leftmost Dirichlet half-line eigenvalue), theta_1^r and Airy zeros.

    nu_1 is the leftmost zero of ``Ai(e^{2 i pi/3} lambda)`` found by the
    argument-principle search; theta_1^r is the smallest real part of the
    zeros of ``A0(i .)`` in [-0.5, 12]^2. Zeros there approach the ray
    arg = pi/3, so any zero outside the window has real part above 6.
    """
    dz = dirichlet_zero_set()
    nu1 = complex(min(dz.zeros, key=lambda z: z.real))
    zs = a0_zero_set()
    first = complex(min(zs.zeros, key=lambda z: z.real))
    return SpecialConstants(
        nu1=nu1,
        theta1r=float(first.real),
        airy_zeros=tuple(float(w) for w in real_airy_zeros(n_airy)),
        theta1=first,
    )
