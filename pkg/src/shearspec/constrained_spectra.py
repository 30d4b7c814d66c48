"""Spectra of the constrained complex Airy operator on the half line.

``L^theta = -d^2/dx^2 + i x`` on (0, oo) with the single integral condition
``<e^{-theta x}, u> = 0``. Its eigenvalues are the zeros of
``F(., theta)``; ``mu0(theta)`` is the smallest real part among them. Also
here: branch continuation in theta, the infimum ``hat_mu_m`` of
``mu0 + theta^2/2``, the two-wall combination ``hat_mu_0``, the
interlacing function ``delta`` and a collocation cross-check of the
spectrum.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from . import airy_special as asp
from .spectral_core import BcSpec, bordered_eigenvalues, build_grid

__all__ = [
    "BranchPoint",
    "BranchSingularityError",
    "UnderResolvedError",
    "default_window",
    "mu0",
    "zeros_of_f",
    "newton_on_branch",
    "branch_trace",
    "branch_certificate",
    "mu0_curve",
    "hat_mu_m",
    "hat_mu_0",
    "delta_alpha",
    "interlaced_roots",
    "l_theta_spectrum",
    "curve_csv",
]

CSV_HEADER = "theta,mu0,im_lambda,mu0_plus_half_theta_sq"


class BranchSingularityError(RuntimeError):
    def __init__(self, last, message="v(0, theta) vanished along the branch"):
        super().__init__(message)
        self.last = last


class UnderResolvedError(RuntimeError):
    pass


@dataclass(frozen=True)
class BranchPoint:
    theta: float
    lam: complex
    residual: float = 0.0

    @property
    def mu(self) -> float:
        return float(self.lam.real)


def default_window() -> tuple:
    """Search window ``Re in [-1, Re nu_1 + 3]``, ``|Im| <= 8``."""
    nu1 = asp.constants().nu1
    return (-1.0, nu1.real + 3.0, -8.0, 8.0)


@lru_cache(maxsize=64)
def _evaluator(theta: float) -> asp.LaplaceEvaluator:
    return asp.LaplaceEvaluator(theta)


def zeros_of_f(theta: float, window: Optional[tuple] = None) -> asp.ZeroSet:
    """All zeros of ``F(., theta)`` inside ``window`` (argument principle)."""
    ev = _evaluator(float(theta))
    return asp.zeros_in_region(ev, window or default_window(), fprime=ev.derivative)


def _residual(lam: complex, theta: float) -> float:
    return abs(asp.f_laplace(complex(lam), theta))


def mu0(theta: float, window: Optional[tuple] = None) -> Optional[BranchPoint]:
    """Zero of ``F(., theta)`` with the smallest real part in ``window``.

    Returns None when the window holds no zero.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    zs = zeros_of_f(theta, window)
    if len(zs.zeros) == 0:
        return None
    lam = complex(min(zs.zeros, key=lambda z: (z.real, z.imag)))
    lam = newton_on_branch(lam, theta)
    return BranchPoint(float(theta), lam, _residual(lam, theta))


def newton_on_branch(lam0: complex, theta: float, tol: float = 1e-14, maxit: int = 30) -> complex:
    """Newton on ``F(., theta)`` with the exact derivative, direct quadrature."""
    lam = complex(lam0)
    for _ in range(maxit):
        F = asp.f_laplace(lam, theta)
        dF = complex(asp.f_laplace_dlambda(lam, theta, F))
        step = F / dF
        lam -= step
        if abs(step) <= tol * max(1.0, abs(lam)):
            break
    return lam


def _branch_rhs(lam: complex, theta: float) -> complex:
    z = asp.E_2PI3 * lam
    ai, aip = asp.airy_pair(np.array([z]))
    v0 = complex(ai[0])
    if abs(v0) < 1e-12:
        raise ZeroDivisionError
    return -asp.E_PI6 * complex(aip[0]) / v0 - theta


def branch_trace(start: BranchPoint, theta_end: float, steps: int = 40) -> list:
    """RK4 on ``dlambda/dtheta = -v_x(0)/v(0) - theta`` with Newton projection.

    ``v(x) = Ai(e^{i pi/6}(x + i lambda))`` so that
    ``v_x(0)/v(0) = e^{i pi/6} Ai'(e^{2 i pi/3} lambda) / Ai(e^{2 i pi/3} lambda)``.
    """
    pts = [start]
    th = start.theta
    lam = start.lam
    h = (theta_end - th) / steps
    for _ in range(steps):
        try:
            k1 = _branch_rhs(lam, th)
            k2 = _branch_rhs(lam + 0.5 * h * k1, th + 0.5 * h)
            k3 = _branch_rhs(lam + 0.5 * h * k2, th + 0.5 * h)
            k4 = _branch_rhs(lam + h * k3, th + h)
        except ZeroDivisionError:
            raise BranchSingularityError(pts[-1]) from None
        lam = lam + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        th = th + h
        lam = newton_on_branch(lam, th)
        pts.append(BranchPoint(float(th), lam, _residual(lam, th)))
    return pts


def _v_norms(lam: complex) -> tuple:
    """``||v||_2^2`` on R_+ and ``|v(0)|^2`` for ``v = Ai(e^{i pi/6}(x + i lambda))``."""
    x_max = 40.0 + 2.0 * abs(lam)
    nodes, weights = asp._half_line_nodes(x_max)
    v = asp.airy_ai(asp.E_PI6 * (nodes + 1j * lam))
    v0 = asp.airy_ai(asp.E_2PI3 * lam)
    return float(np.sum(weights * np.abs(v) ** 2)), float(abs(v0) ** 2)


def branch_certificate(points: list) -> list:
    """Lower envelope ``g(theta_0) exp(-int ||v||^2/|v(0)|^2)`` along a traced branch.

    Returns a list of ``(theta, g(theta), envelope(theta))`` with
    ``g = mu + theta^2/2``; the integral uses the trapezoid rule on the
    branch points.
    """
    ratio = []
    for p in points:
        nv, v0 = _v_norms(p.lam)
        ratio.append(nv / v0)
    out = []
    g0 = points[0].mu + 0.5 * points[0].theta ** 2
    acc = 0.0
    for i, p in enumerate(points):
        if i:
            acc += 0.5 * (ratio[i] + ratio[i - 1]) * (p.theta - points[i - 1].theta)
        out.append((p.theta, p.mu + 0.5 * p.theta**2, g0 * math.exp(-acc)))
    return out


def _window_count(theta: float, window: tuple) -> Optional[int]:
    ev = _evaluator(float(theta))
    wi, wp, _, _ = asp._winding(ev, ev.derivative, window, 512)
    k = int(round(wp))
    if abs(wi - round(wi.real)) < 0.05 and abs(wp - k) < 0.05 and round(wi.real) == k:
        return k
    return None


def _inside(z: complex, w: tuple) -> bool:
    return w[0] < z.real < w[1] and w[2] < z.imag < w[3]


def mu0_curve(theta_max: float = 12.0, step: float = 0.05, window: Optional[tuple] = None,
              check_every: int = 5) -> list:
    """``mu0`` on the grid ``0, step, ..., theta_max`` by tracking every zero.

    All zeros in ``window`` are continued in theta by secant prediction and
    Newton correction; every ``check_every`` grid points the winding number
    around the window is compared with the tracked count and a full
    argument-principle search reseeds the set on mismatch.
    """
    window = window or default_window()
    thetas = np.round(np.arange(0.0, theta_max + 0.5 * step, step), 12)
    tracked = list(zeros_of_f(float(thetas[0]), window).zeros)
    prev = list(tracked)
    out = []
    for i, th in enumerate(thetas):
        th = float(th)
        if i:
            pred = [2 * a - b if len(prev) == len(tracked) else a for a, b in zip(tracked, prev)]
            new = [newton_on_branch(z, th) for z in pred]
            prev, tracked = tracked, new
            keep = [(a, b) for a, b in zip(tracked, prev) if _inside(a, window)]
            tracked = [a for a, _ in keep]
            prev = [b for _, b in keep]
            distinct = []
            for z in tracked:
                if all(abs(z - w) > 1e-8 for w in distinct):
                    distinct.append(z)
            if len(distinct) != len(tracked):
                tracked = distinct
                prev = list(distinct)
            if i % check_every == 0 and _window_count(th, window) != len(tracked):
                tracked = list(zeros_of_f(th, window).zeros)
                prev = list(tracked)
        if not tracked:
            out.append(None)
            continue
        lam = min(tracked, key=lambda z: (z.real, z.imag))
        out.append(BranchPoint(th, complex(lam), _residual(lam, th)))
    return out


@lru_cache(maxsize=4)
def _hat_mu_m_cached(theta_max: float, step: float) -> tuple:
    curve = mu0_curve(theta_max, step)
    vals = [(p.mu + 0.5 * p.theta**2) if p is not None else np.inf for p in curve]
    i = int(np.argmin(vals))
    best = vals[i]
    best_theta = curve[i].theta
    lo = curve[max(i - 1, 0)].theta
    hi = curve[min(i + 1, len(curve) - 1)].theta
    if hi > lo:
        seed = curve[i].lam

        def g(th):
            lam = newton_on_branch(seed, th)
            return lam.real + 0.5 * th * th

        res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
        if res.fun < best:
            best, best_theta = float(res.fun), float(res.x)
    return float(best), float(best_theta), tuple(curve)


def hat_mu_m(theta_max: float = 12.0, step: float = 0.05) -> float:
    """``inf_theta (mu0(theta) + theta^2/2)`` on a grid with local refinement."""
    return _hat_mu_m_cached(float(theta_max), float(step))[0]


def hat_mu_0(theta: float, j_minus: float, j_plus: float, mu0_fn=None) -> float:
    """``min(J_-^{2/3} mu0(J_-^{-1/3} theta), J_+^{2/3} mu0(J_+^{-1/3} theta))``."""
    if j_minus <= 0 or j_plus <= 0:
        raise ValueError("wall shears must be positive")
    f = mu0_fn or (lambda t: mu0(t).mu)
    vals = []
    for J in (j_minus, j_plus):
        vals.append(J ** (2.0 / 3.0) * f(J ** (-1.0 / 3.0) * theta))
    return float(min(vals))


# --------------------------------------------------------------------------
# interlacing


def _ai_real(x: float) -> tuple:
    a, b = asp.airy_pair(np.array([complex(x)]))
    return float(a[0].real), float(b[0].real)


def delta_alpha(alpha: float) -> float:
    """``-Ai'(alpha)/Ai(alpha) + Ai'(-alpha)/Ai(-alpha)``."""
    a1, d1 = _ai_real(alpha)
    a2, d2 = _ai_real(-alpha)
    if abs(a1) < 1e-10 or abs(a2) < 1e-10:
        raise asp.PoleProximityError(alpha, min(abs(a1), abs(a2)))
    return -d1 / a1 + d2 / a2


def interlaced_roots(n: int, tol: float = 1e-13) -> np.ndarray:
    """Root of ``delta`` in ``(-omega_k, -omega_{k+1})`` for ``k = 1..n``.

    delta has simple poles at both ends of each interval with opposite
    limits, so bisection from just inside the poles brackets the root.
    """
    w = asp.real_airy_zeros(n + 1)
    roots = []
    for k in range(n):
        a, b = -w[k], -w[k + 1]
        pad = 1e-6
        lo, hi = a + pad, b - pad
        flo, fhi = delta_alpha(lo), delta_alpha(hi)
        if flo * fhi > 0:
            raise RuntimeError(f"no sign change of delta on ({a}, {b})")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = delta_alpha(mid)
            if fm == 0.0:
                lo = hi = mid
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
            if hi - lo < tol:
                break
        roots.append(0.5 * (lo + hi))
    return np.array(roots)


# --------------------------------------------------------------------------
# collocation realization of L^theta


def _l_theta_eigs(theta: Optional[float], x_max: float, n: int) -> np.ndarray:
    grid = build_grid(n)
    t = grid.nodes
    x = 0.5 * x_max * (1.0 - t)
    # d/dx = -(2/X) d/dt
    D2 = (2.0 / x_max) ** 2 * grid.d(2)
    A = -D2 + 1j * np.diag(x)
    N = grid.size
    # node 0 sits at x = 0, node n at x = x_max
    row_far = np.zeros(N)
    row_far[n] = 1.0
    if theta is None:
        near = np.zeros(N)
        near[0] = 1.0
    else:
        near = grid.weights * 0.5 * x_max * np.exp(-theta * x)
    bc = BcSpec.mixed([0, n], [near, row_far], weighted=False)
    return bordered_eigenvalues(A, bc, grid)


def l_theta_spectrum(theta: Optional[float], x_max: float = 40.0, n: int = 128,
                     check: bool = True) -> np.ndarray:
    """Eigenvalues of ``-d^2/dx^2 + i x`` on (0, x_max), sorted by real part.

    The Chebyshev grid is mapped to [0, x_max]; the far end carries an
    artificial Dirichlet row and the row at x = 0 is replaced by the
    quadrature form of ``<e^{-theta x}, u> = 0`` (``theta=None`` puts a
    Dirichlet row there instead). Only eigenvalues with ``|Im| <= x_max/2``
    are returned. With ``check`` the leading eigenvalue is recomputed at
    ``3n/2`` and :class:`UnderResolvedError` is raised if it moves by more
    than 1e-4.
    """
    if x_max < 30 or n < 96:
        raise ValueError("need x_max >= 30 and n >= 96")
    ev = _l_theta_eigs(theta, x_max, n)
    ev = ev[np.abs(ev.imag) <= 0.5 * x_max]
    ev = ev[np.argsort(ev.real)]
    if check and ev.size:
        n2 = 3 * n // 2
        n2 += n2 % 2
        ev2 = _l_theta_eigs(theta, x_max, n2)
        ev2 = ev2[np.abs(ev2.imag) <= 0.5 * x_max]
        lead2 = ev2[np.argmin(np.abs(ev2 - ev[0]))]
        if abs(lead2 - ev[0]) > 1e-4:
            raise UnderResolvedError(f"leading eigenvalue moved by {abs(lead2 - ev[0]):.2e}")
    return ev


def curve_csv(points: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    for p in points:
        if p is None:
            continue
        w.writerow([f"{p.theta:.17g}", f"{p.mu:.17g}", f"{p.lam.imag:.17g}",
                    f"{p.mu + 0.5 * p.theta ** 2:.17g}"])
    return buf.getvalue()
