"""Base flows and discrete Schrodinger, Rayleigh and Orr-Sommerfeld operators."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .dense_complex import eigenvalues, solve_linear_matrix
from .spectral_core import (
    BcSpec,
    SpectralGrid,
    build_grid,
    impose_bc,
    interpolate,
    reduce_bordered,
)

__all__ = [
    "BaseFlow",
    "OperatorPencil",
    "OSSpectrum",
    "RayleighSolution",
    "RayleighLimit",
    "make_flow",
    "parse_flow",
    "schrodinger_dirichlet",
    "schrodinger_constrained",
    "constraint_profiles",
    "rayleigh_matrix",
    "rayleigh_solve",
    "rayleigh_limit",
    "h1_distance",
    "orr_sommerfeld_pencil",
    "os_spectrum",
    "gamma_m",
    "bc_spec",
    "critical_reynolds",
]

_FINE = np.linspace(-1.0, 1.0, 4001)


@dataclass(frozen=True, eq=False)
class BaseFlow:
    """Shear profile sampled on a grid, with its scalar descriptors.

    ``j_minus``/``j_plus`` are the signed wall shears ``U'(-1)``/``U'(1)``;
    ``j_m = min(|U'(-1)|, |U'(1)|)``; ``delta2 = ||U''||_oo + ||U'''||_oo``;
    ``s_r_radius`` is the smallest ``r`` with ``inf|U'| >= 1/r`` and every sup
    norm of ``U, ..., U''''`` at most ``r`` (``inf`` when ``m = 0``).
    """

    name: str
    grid: SpectralGrid
    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray
    d3u: np.ndarray
    d4u: np.ndarray
    m: float
    j_minus: float
    j_plus: float
    j_m: float
    delta2: float
    s_r_radius: float
    inf_abs_d2u: float
    sup_du: float
    u_minus: float
    u_plus: float
    flags: tuple = ()

    @property
    def in_s_r(self) -> bool:
        return np.isfinite(self.s_r_radius)

    def on(self, grid: SpectralGrid) -> "BaseFlow":
        """The same profile resampled on another grid."""
        if grid.n == self.grid.n:
            return self
        return make_flow(self.name, grid)


def _descriptors(name, grid, fns, flags=()):
    x = grid.nodes
    u, du, d2u, d3u, d4u = (np.asarray(f(x), dtype=float) for f in fns)
    fine = [np.asarray(f(_FINE), dtype=float) for f in fns]
    m = float(np.min(np.abs(fine[1])))
    sups = [float(np.max(np.abs(v))) for v in fine]
    m_rel = m if m > 1e-12 else 0.0
    flags = tuple(flags)
    if m_rel == 0.0:
        radius = math.inf
        flags = flags + ("zero_min_shear",)
    else:
        radius = max([1.0 / m_rel] + sups)
    jm, jp = float(fns[1](np.array([-1.0]))[0]), float(fns[1](np.array([1.0]))[0])
    return BaseFlow(
        name=name,
        grid=grid,
        u=u,
        du=du,
        d2u=d2u,
        d3u=d3u,
        d4u=d4u,
        m=m_rel,
        j_minus=jm,
        j_plus=jp,
        j_m=min(abs(jm), abs(jp)),
        delta2=sups[2] + sups[3],
        s_r_radius=radius,
        inf_abs_d2u=float(np.min(np.abs(fine[2]))),
        sup_du=sups[1],
        u_minus=float(fns[0](np.array([-1.0]))[0]),
        u_plus=float(fns[0](np.array([1.0]))[0]),
        flags=flags,
    )


def parse_flow(spec: str) -> tuple:
    """``'couette' | 'poiseuille' | 'zero' | 'nearly:<d>' | 'convex:<c>'`` to (kind, param)."""
    spec = spec.strip().lower()
    if ":" in spec:
        kind, val = spec.split(":", 1)
        kind = {"nearly_couette": "nearly"}.get(kind, kind)
        if kind not in ("nearly", "convex"):
            raise ValueError(f"unknown flow family {kind!r}")
        return kind, float(val)
    if spec not in ("couette", "poiseuille", "zero"):
        raise ValueError(f"unknown flow {spec!r}")
    return spec, None


def make_flow(kind: str, grid: Optional[SpectralGrid] = None, param: Optional[float] = None,
              samples=None) -> BaseFlow:
    """Construct a base flow.

    ``kind`` is ``couette`` (U = x), ``poiseuille`` (U = 1 - x^2), ``zero``,
    ``nearly`` (U = x + d sin(pi x)/pi^2), ``convex`` (U = x + c x^2/2),
    ``custom`` (``samples`` on the grid, derivatives spectral) or a flow
    spec string such as ``'nearly:0.05'``.
    """
    grid = grid or build_grid()
    if ":" in kind:
        kind, param = parse_flow(kind)
    kind = {"nearly_couette": "nearly"}.get(kind, kind)
    zero = lambda x: np.zeros_like(x)  # noqa: E731
    one = lambda x: np.ones_like(x)  # noqa: E731
    if kind == "couette":
        return _descriptors("couette", grid, (lambda x: x, one, zero, zero, zero))
    if kind == "zero":
        return _descriptors("zero", grid, (zero,) * 5)
    if kind == "poiseuille":
        return _descriptors(
            "poiseuille", grid, (lambda x: 1 - x**2, lambda x: -2 * x, lambda x: -2 + 0 * x, zero, zero)
        )
    if kind == "nearly":
        d = float(param)
        if d < 0:
            raise ValueError("delta must be non-negative")
        pi = math.pi
        fns = (
            lambda x: x + d * np.sin(pi * x) / pi**2,
            lambda x: 1 + d * np.cos(pi * x) / pi,
            lambda x: -d * np.sin(pi * x),
            lambda x: -d * pi * np.cos(pi * x),
            lambda x: d * pi**2 * np.sin(pi * x),
        )
        return _descriptors(f"nearly:{d:g}", grid, fns)
    if kind == "convex":
        c = float(param)
        if abs(c) >= 1:
            raise ValueError("convex(c) needs |c| < 1 so that U' > 0")
        fns = (lambda x: x + 0.5 * c * x**2, lambda x: 1 + c * x, lambda x: c + 0 * x, zero, zero)
        return _descriptors(f"convex:{c:g}", grid, fns)
    if kind == "custom":
        if samples is None:
            raise ValueError("custom flow needs samples")
        u = np.asarray(samples, dtype=float)
        ders = [u] + [grid.d(k) @ u for k in range(1, 5)]
        fns = tuple((lambda v: (lambda x: interpolate(grid, v, x).real))(v) for v in ders)
        return _descriptors("custom", grid, fns)
    raise ValueError(f"unknown flow kind {kind!r}")


# --------------------------------------------------------------------------
# Schrodinger operators


def schrodinger_dirichlet(beta: float, flow: BaseFlow, grid: Optional[SpectralGrid] = None) -> np.ndarray:
    """``-D^2 + i beta U`` with Dirichlet rows."""
    grid = grid or flow.grid
    flow = flow.on(grid)
    A = -grid.d(2) + 1j * beta * np.diag(flow.u)
    return impose_bc(A, BcSpec("dirichlet"), grid)


def constraint_profiles(alpha: float, x) -> tuple:
    """``(z_+, z_-)`` with ``z_+ = sinh(alpha(1+x))/sinh(2 alpha)`` and its mirror.

    Written as ``e^{-alpha(1-x)} (1 - e^{-2 alpha(1+x)}) / (1 - e^{-4 alpha})``,
    which equals the sinh ratio exactly and cannot overflow.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x = np.asarray(x, dtype=float)
    den = -np.expm1(-4 * alpha)
    zp = np.exp(-alpha * (1 - x)) * (-np.expm1(-2 * alpha * (1 + x))) / den
    zm = np.exp(-alpha * (1 + x)) * (-np.expm1(-2 * alpha * (1 - x))) / den
    return zp, zm


def schrodinger_constrained(beta: float, flow: BaseFlow, grid: Optional[SpectralGrid], alpha: float):
    """``-D^2 + i beta U`` with rows 0, n replaced by ``<z_+-, u> = 0``.

    Returns ``(matrix, bc)``.
    """
    grid = grid or flow.grid
    flow = flow.on(grid)
    zp, zm = constraint_profiles(alpha, grid.nodes)
    bc = BcSpec.constrained(zp, zm)
    A = -grid.d(2) + 1j * beta * np.diag(flow.u)
    return impose_bc(A, bc, grid), bc


# --------------------------------------------------------------------------
# Rayleigh operator


def rayleigh_matrix(lam: complex, alpha: float, flow: BaseFlow, grid: Optional[SpectralGrid] = None) -> np.ndarray:
    """``diag(U + i lam)(-D^2 + alpha^2) + diag(U'')`` with Dirichlet rows."""
    grid = grid or flow.grid
    flow = flow.on(grid)
    N = grid.size
    A = np.diag(flow.u + 1j * lam) @ (-grid.d(2) + alpha**2 * np.eye(N)) + np.diag(flow.d2u)
    return impose_bc(A, BcSpec("dirichlet"), grid)


@dataclass
class RayleighSolution:
    """Solution of ``A_{lam,alpha} phi = v`` (or its kappa-regularized form).

    ``phi``/``dphi`` are callables on [-1, 1]; ``nodes_phi`` holds grid values.
    """

    lam: complex
    alpha: float
    kappa: float
    phi: Callable
    dphi: Callable
    nodes_phi: np.ndarray
    h1_norm: float
    l2_norm: float
    nfev: int = 0


@dataclass
class RayleighLimit:
    """Embedded-case driver output: values along the kappa schedule."""

    kappas: tuple
    solutions: list
    increments: list
    stabilized: bool
    phi: Callable
    h1_norm: float


def _norm_mesh(breaks: Sequence[float]) -> np.ndarray:
    pts = [np.linspace(-1, 1, 4001)]
    for b in breaks:
        g = np.geomspace(1e-9, 2.0, 600)
        pts += [b - g, b + g]
    x = np.concatenate(pts)
    x = x[(x >= -1) & (x <= 1)]
    return np.unique(x)


def _flow_fns(flow: BaseFlow):
    n = flow.name
    grid = flow.grid
    if n == "couette":
        return (lambda x: x), (lambda x: 1.0 + 0 * x)
    if n == "poiseuille":
        return (lambda x: 1 - x * x), (lambda x: -2 * x)
    if n == "zero":
        return (lambda x: 0 * x), (lambda x: 0 * x)
    if n.startswith("nearly:"):
        d = float(n.split(":")[1])
        return (lambda x: x + d * np.sin(np.pi * x) / np.pi**2), (lambda x: 1 + d * np.cos(np.pi * x) / np.pi)
    if n.startswith("convex:"):
        c = float(n.split(":")[1])
        return (lambda x: x + 0.5 * c * x * x), (lambda x: 1 + c * x)
    u, du = flow.u, flow.du
    return (lambda x: interpolate(grid, u, x).real), (lambda x: interpolate(grid, du, x).real)


def _critical_points(flow: BaseFlow, nu: float) -> list:
    U, _ = _flow_fns(flow)
    xs = _FINE
    f = U(xs) - nu
    out = []
    for i in range(xs.size - 1):
        if f[i] == 0:
            out.append(float(xs[i]))
        elif f[i] * f[i + 1] < 0:
            a, b = xs[i], xs[i + 1]
            for _ in range(80):
                mid = 0.5 * (a + b)
                if (U(np.array([mid]))[0] - nu) * (U(np.array([a]))[0] - nu) <= 0:
                    b = mid
                else:
                    a = mid
            out.append(0.5 * (a + b))
    return [c for c in out if -1 < c < 1]


def rayleigh_solve(lam: complex, alpha: float, flow: BaseFlow, v, kappa: float = 0.0,
                   breaks: Sequence[float] = (), rtol: float = 1e-12, atol: float = 1e-14,
                   grid: Optional[SpectralGrid] = None) -> RayleighSolution:
    """Solve ``(U + i lam)(-phi'' + alpha^2 phi) + U'' phi = v``, ``phi(+-1) = 0``.

    Writing ``phi = c w`` turns the equation into the divergence form
    ``-(p w')' + alpha^2 p w = v``. For ``Re lam = mu != 0``, ``c = U - nu + i mu``
    and ``p = c^2`` (direct solve; ``kappa`` is ignored). For ``mu = 0`` and
    ``kappa > 0``, ``c = U - nu + i kappa`` and ``p = (U - nu)^2 + kappa^2``
    (the kappa-regularized system). ``v`` is a callable of x or grid samples.
    The two-point problem is shot from x = -1 with an adaptive 8th-order
    Runge-Kutta integrator (particular plus homogeneous solution); ``breaks``
    are extra points where the integration restarts (discontinuities of v).
    """
    grid = grid or flow.grid
    lam = complex(lam)
    mu, nu = lam.real, lam.imag
    U, dU = _flow_fns(flow)
    if callable(v):
        vf = v
    else:
        vv = np.asarray(v, dtype=complex)
        vf = lambda x: interpolate(grid, vv, x)[0] if np.ndim(x) == 0 else interpolate(grid, vv, x)  # noqa: E731
    if mu != 0.0:
        shift = 1j * mu
        regularized = False
    else:
        crit = _critical_points(flow, nu)
        if crit and kappa <= 0:
            raise ValueError("kappa > 0 required on the embedded spectrum")
        shift = 1j * kappa
        regularized = True

    def cfun(x):
        return U(x) - nu + shift

    def pfun(x):
        if regularized:
            return (U(x) - nu) ** 2 + kappa**2
        return cfun(x) ** 2

    a2 = alpha**2

    def rhs_factory(with_v):
        def rhs(x, y):
            p = pfun(x)
            w, q = y[0], y[1]
            src = vf(x) if with_v else 0.0
            return np.array([q / p, a2 * p * w - src])

        return rhs

    cuts = sorted({-1.0, 1.0, *[b for b in breaks if -1 < b < 1], *_critical_points(flow, nu)})
    nfev = 0

    def shoot(y0, with_v):
        nonlocal nfev
        segs = []
        y = np.array(y0, dtype=complex)
        for a, b in zip(cuts[:-1], cuts[1:]):
            sol = solve_ivp(rhs_factory(with_v), (a, b), y, method="DOP853", rtol=rtol,
                            atol=atol, dense_output=True)
            if not sol.success:
                raise RuntimeError(sol.message)
            nfev += sol.nfev
            segs.append((a, b, sol.sol))
            y = sol.y[:, -1]
        return segs, y

    part, yp = shoot([0.0, 0.0], True)
    hom, yh = shoot([0.0, 1.0], False)
    if abs(yh[0]) == 0:
        raise np.linalg.LinAlgError("homogeneous solution vanishes at x = 1")
    s = -yp[0] / yh[0]

    def state(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((2, x.size), dtype=complex)
        for segs, coef in ((part, 1.0), (hom, s)):
            # half-open segments so that a break point is evaluated once
            for i, (a, b, f) in enumerate(segs):
                m = (x >= a) & ((x < b) | ((i == len(segs) - 1) & (x <= b)))
                if m.any():
                    out[:, m] += coef * f(x[m])
        return out

    def phi(x):
        st = state(x)
        return cfun(np.atleast_1d(np.asarray(x, dtype=float))) * st[0]

    def dphi(x):
        xx = np.atleast_1d(np.asarray(x, dtype=float))
        st = state(xx)
        return dU(xx) * st[0] + cfun(xx) * st[1] / pfun(xx)

    mesh = _norm_mesh(cuts[1:-1])
    ph, dph = phi(mesh), dphi(mesh)
    l2 = math.sqrt(np.trapezoid(np.abs(ph) ** 2, mesh))
    h1 = math.sqrt(l2**2 + np.trapezoid(np.abs(dph) ** 2, mesh))
    return RayleighSolution(lam, alpha, kappa if regularized else 0.0, phi, dphi,
                            phi(grid.nodes), h1, l2, nfev)


def h1_distance(a: RayleighSolution, b: RayleighSolution, breaks: Sequence[float] = ()) -> float:
    mesh = _norm_mesh(list(breaks))
    d0 = a.phi(mesh) - b.phi(mesh)
    d1 = a.dphi(mesh) - b.dphi(mesh)
    return math.sqrt(np.trapezoid(np.abs(d0) ** 2 + np.abs(d1) ** 2, mesh))


def rayleigh_limit(nu: float, alpha: float, flow: BaseFlow, v,
                   kappas: Sequence[float] = (1e-2, 1e-3, 1e-4), **kw) -> RayleighLimit:
    """Embedded case ``lam = i nu``: kappa schedule, Cauchy increments, limit.

    The increments are H^1 distances between consecutive kappa. The schedule
    counts as stabilized when each increment is below half the previous one.
    The returned ``phi`` is the Richardson extrapolation
    ``(r phi_{k2} - phi_{k1})/(r - 1)``, ``r = k1/k2``, of the last two
    solutions, which removes the term linear in kappa.
    """
    sols = [rayleigh_solve(1j * nu, alpha, flow, v, kappa=k, **kw) for k in kappas]
    crit = _critical_points(flow, nu)
    incs = [h1_distance(a, b, crit) for a, b in zip(sols[:-1], sols[1:])]
    stab = all(b < 0.5 * a for a, b in zip(incs[:-1], incs[1:])) if len(incs) > 1 else True
    k1, k2 = kappas[-2], kappas[-1]
    r = k1 / k2
    s1, s2 = sols[-2], sols[-1]

    def phi(x):
        return (r * s2.phi(x) - s1.phi(x)) / (r - 1)

    return RayleighLimit(tuple(kappas), sols, incs, stab, phi, sols[-1].h1_norm)


# --------------------------------------------------------------------------
# Orr-Sommerfeld


def bc_spec(bc: str) -> BcSpec:
    """``'S'`` (u = u'' = 0) or ``'D'`` (u = u' = 0) at both walls."""
    bc = bc.upper()
    if bc == "S":
        return BcSpec("dirichlet2")
    if bc == "D":
        return BcSpec("dirichlet4")
    raise ValueError("bc must be 'S' or 'D'")


@dataclass(frozen=True, eq=False)
class OperatorPencil:
    """``B(lam) = b0 - beta lam b1``; boundary rows live in b0 only."""

    b0: np.ndarray
    b1: np.ndarray
    bc: BcSpec
    bc_name: str
    alpha: float
    beta: float
    flow: BaseFlow
    grid: SpectralGrid

    @property
    def epsilon(self) -> float:
        return self.alpha / self.beta

    def matrix(self, lam: complex) -> np.ndarray:
        return self.b0 - self.beta * lam * self.b1


def orr_sommerfeld_pencil(alpha: float, beta: float, flow: BaseFlow, bc: str = "S",
                          grid: Optional[SpectralGrid] = None) -> OperatorPencil:
    """``b0 = (-D^2 + i beta U)(D^2 - alpha^2) - i beta U''``, ``b1 = D^2 - alpha^2``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    grid = grid or flow.grid
    flow = flow.on(grid)
    N = grid.size
    I = np.eye(N)
    L = -grid.d(2) + 1j * beta * np.diag(flow.u)
    M = grid.d(2) - alpha**2 * I
    b0 = L @ M - 1j * beta * np.diag(flow.d2u)
    spec = bc_spec(bc)
    b0 = impose_bc(b0, spec, grid)
    b1 = np.array(M, dtype=complex)
    rows = reduce_bordered(spec, grid).rows
    b1[list(rows), :] = 0.0
    return OperatorPencil(b0, b1, spec, bc.upper(), float(alpha), float(beta), flow, grid)


@dataclass
class OSSpectrum:
    lam: np.ndarray
    lambda_hat: np.ndarray
    Lambda: np.ndarray
    pencil: OperatorPencil

    def least_stable(self) -> complex:
        return complex(self.Lambda[np.argmin(self.Lambda.real)])

    def to_json(self) -> str:
        p = self.pencil
        order = np.argsort(self.Lambda.real)
        return json.dumps(
            {
                "flow": p.flow.name,
                "bc": p.bc_name,
                "alpha": float(f"{p.alpha:.17g}"),
                "beta": float(f"{p.beta:.17g}"),
                "eigenvalues_Lambda": [
                    [float(f"{z.real:.17g}"), float(f"{z.imag:.17g}")] for z in self.Lambda[order]
                ],
            }
        )


def os_spectrum(pencil: OperatorPencil, solver=None) -> OSSpectrum:
    """Eigenvalues of the pencil reported as lam, Lambda_hat = beta lam + alpha^2, Lambda = eps Lambda_hat.

    Boundary unknowns are eliminated, the reduced b1 is inverted by LU and
    the standard problem is solved by ``solver`` (package QR by default).
    """
    red = reduce_bordered(pencil.bc, pencil.grid)
    K = red.reduce(pencil.b0)
    Mr = red.reduce(pencil.b1)
    G = solve_linear_matrix(Mr, K)
    blam = np.asarray((solver or eigenvalues)(G))
    lam = blam / pencil.beta
    lh = blam + pencil.alpha**2
    return OSSpectrum(lam, lh, pencil.epsilon * lh, pencil)


# --------------------------------------------------------------------------
# quadratic form


def gamma_m(lam: complex, flow: BaseFlow, grid: Optional[SpectralGrid] = None) -> float:
    """Smallest value of ``I(phi)/||phi||^2`` over ``H^1_0``.

    ``I(phi) = 1/2 ||phi'||^2 + <U''(U - nu)/((U - nu)^2 + mu^2) phi, phi>``
    with ``lam = mu + i nu``; the forms are assembled with Clenshaw-Curtis
    weights on the Dirichlet-reduced grid and the symmetric-definite
    generalized problem is solved with LAPACK.
    """
    lam = complex(lam)
    mu, nu = lam.real, lam.imag
    if mu == 0:
        raise ValueError("Re lambda must be non-zero")
    grid = grid or flow.grid
    flow = flow.on(grid)
    w = grid.weights
    inner = slice(1, grid.n)
    D1 = grid.d(1)[:, inner]
    q = flow.d2u * (flow.u - nu) / ((flow.u - nu) ** 2 + mu**2)
    A = 0.5 * D1.T @ (w[:, None] * D1) + np.diag((w * q)[inner])
    B = np.diag(w[inner])
    A = 0.5 * (A + A.T)
    return float(sla.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])[0])


def critical_reynolds(flow: BaseFlow, alpha: float, bc: str = "D", grid: Optional[SpectralGrid] = None,
                      bracket: tuple = (5000.0, 6500.0), xtol: float = 1e-6) -> tuple:
    """Reynolds number ``1/eps`` at which the least stable mode at fixed ``alpha`` is neutral.

    Brent's method on ``R -> R Re Lambda_min(alpha, beta = alpha R)``; the
    bracket must contain a sign change. Returns ``(R, Lambda_hat)``.
    """
    from scipy.optimize import brentq

    grid = grid or flow.grid

    def least(R):
        return os_spectrum(orr_sommerfeld_pencil(alpha, alpha * R, flow, bc, grid)).least_stable()

    def f(R):
        return least(R).real * R

    fa, fb = f(bracket[0]), f(bracket[1])
    if fa * fb > 0:
        raise ValueError(f"no neutral crossing in Reynolds bracket {bracket}")
    R = brentq(f, bracket[0], bracket[1], xtol=xtol)
    return float(R), complex(least(R) * R)
