"""Periodic-channel fields, Hodge projections and per-mode semigroup norms.

Fields live on ``(x1, x2) in [0, L) x [-1, 1]`` and are stored as Fourier
modes in ``x1`` whose profiles are nodal values on a Chebyshev grid in ``x2``.
Conventions: ``grad_perp phi = (d2 phi, -d1 phi)`` and
``curl u = d1 u2 - d2 u1`` so that ``curl grad_perp phi = -Lap phi``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .dense_complex import (
    ExpmOverflowError,
    GramMetric,
    eigenvalues,
    expm_norm_curve,
    smallest_singular_value,
    solve_linear_matrix,
)
from .flow_operators import BaseFlow, bc_spec
from .spectral_core import BcSpec, SpectralGrid, build_grid, impose_bc, reduce_bordered

__all__ = [
    "PeriodicField",
    "ScalarField",
    "project_pi",
    "project_p",
    "hodge_decompose",
    "recover_pressure",
    "NotCurlFreeError",
    "HypothesisError",
    "ModeGenerator",
    "mode_generator",
    "semigroup_norm_curve",
    "pi_decay_rate",
    "gearhart_pruss_bound",
    "vertical_line_resolvent_sup",
    "t_grid",
    "theorem_rate_check",
    "RateReport",
]

DELTA2_MAX = 0.1


class NotCurlFreeError(ValueError):
    pass


class HypothesisError(ValueError):
    pass


def _alpha(n: int, L: float) -> float:
    return 2.0 * math.pi * n / L


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Vector field ``u(x1, x2) = sum_n (u1_n(x2), u2_n(x2)) exp(2 pi i n x1/L)``."""

    L: float
    grid: SpectralGrid
    modes: dict
    divergence_free: bool = False
    zero_flux: bool = False

    def mode(self, n: int) -> tuple:
        z = np.zeros(self.grid.size, dtype=complex)
        return self.modes.get(n, (z, z))

    def inner(self, other: "PeriodicField") -> complex:
        """``int int u . conj(v)`` over one period cell."""
        w = self.grid.weights
        s = 0j
        for n in set(self.modes) | set(other.modes):
            a1, a2 = self.mode(n)
            b1, b2 = other.mode(n)
            s += np.sum(w * (a1 * np.conj(b1) + a2 * np.conj(b2)))
        return complex(self.L * s)

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self).real, 0.0))

    def _combine(self, other, a, b) -> "PeriodicField":
        keys = sorted(set(self.modes) | set(other.modes))
        modes = {}
        for n in keys:
            p1, p2 = self.mode(n)
            q1, q2 = other.mode(n)
            modes[n] = (a * p1 + b * q1, a * p2 + b * q2)
        return PeriodicField(self.L, self.grid, modes)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def scaled(self, c) -> "PeriodicField":
        return PeriodicField(self.L, self.grid, {n: (c * a, c * b) for n, (a, b) in self.modes.items()},
                             self.divergence_free, self.zero_flux)

    def divergence_residual(self) -> float:
        D = self.grid.d(1)
        r = 0.0
        for n, (a, b) in self.modes.items():
            r = max(r, float(np.max(np.abs(1j * _alpha(n, self.L) * a + D @ b))),
                    abs(b[0]), abs(b[-1]))
        return r

    def flux(self) -> complex:
        a, _ = self.mode(0)
        return complex(np.sum(self.grid.weights * a))

    def is_real(self, tol: float = 1e-12) -> bool:
        for n, (a, b) in self.modes.items():
            c, d = self.mode(-n)
            if np.max(np.abs(a - np.conj(c))) > tol or np.max(np.abs(b - np.conj(d))) > tol:
                return False
        return True

    def evaluate(self, x1, x2) -> tuple:
        """Physical values at points ``(x1, x2)`` via barycentric interpolation."""
        from .spectral_core import interpolate

        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        u1 = np.zeros(np.broadcast(x1, x2).shape, dtype=complex)
        u2 = np.zeros_like(u1)
        for n, (a, b) in self.modes.items():
            e = np.exp(1j * _alpha(n, self.L) * x1)
            u1 = u1 + e * interpolate(self.grid, a, x2)
            u2 = u2 + e * interpolate(self.grid, b, x2)
        return u1, u2

    @staticmethod
    def from_modes(L: float, grid: SpectralGrid, modes: dict) -> "PeriodicField":
        f = PeriodicField(L, grid, {int(k): (np.asarray(a, complex), np.asarray(b, complex))
                                    for k, (a, b) in modes.items()})
        return replace(f, divergence_free=f.divergence_residual() < 1e-10,
                       zero_flux=abs(f.flux()) < 1e-12)

    @staticmethod
    def random(L: float = 2 * math.pi, n_modes: int = 3, n: int = 48, seed: Optional[int] = None,
               real: bool = True, decay: float = 0.6) -> "PeriodicField":
        """Smooth random field: Chebyshev coefficients decaying like ``exp(-decay k)``."""
        rng = np.random.default_rng(seed)
        grid = build_grid(n)
        theta = np.arccos(np.clip(grid.nodes, -1, 1))
        k = np.arange(n + 1)
        T = np.cos(np.outer(theta, k))
        env = np.exp(-decay * k)

        def profile():
            c = (rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)) * env
            return T @ c

        modes = {}
        for m in range(0, n_modes + 1):
            a, b = profile(), profile()
            if real and m == 0:
                a, b = a.real + 0j, b.real + 0j
            modes[m] = (a, b)
            if m and real:
                modes[-m] = (np.conj(a), np.conj(b))
            elif m:
                modes[-m] = (profile(), profile())
        return PeriodicField.from_modes(L, grid, modes)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """``q(x1, x2) = slope x1 + sum_n q_n(x2) exp(2 pi i n x1/L)``."""

    L: float
    grid: SpectralGrid
    modes: dict
    slope: complex = 0.0

    def gradient(self) -> PeriodicField:
        D = self.grid.d(1)
        modes = {n: (1j * _alpha(n, self.L) * q, D @ q) for n, q in self.modes.items()}
        z = np.zeros(self.grid.size, dtype=complex)
        a, b = modes.get(0, (z, z))
        modes[0] = (a + self.slope, b)
        return PeriodicField.from_modes(self.L, self.grid, modes)

    def mean(self) -> complex:
        q0 = self.modes.get(0)
        if q0 is None:
            return 0j
        return complex(0.5 * np.sum(self.grid.weights * q0))


# --------------------------------------------------------------------------
# projections


def project_pi(f: PeriodicField) -> PeriodicField:
    """Keep the ``x1``-independent mode only."""
    z = np.zeros(f.grid.size, dtype=complex)
    a, b = f.modes.get(0, (z, z))
    return PeriodicField.from_modes(f.L, f.grid, {0: (a.copy(), b.copy())})


def _dirichlet_poisson(grid: SpectralGrid, alpha: float, rhs) -> np.ndarray:
    N = grid.size
    A = -grid.d(2) + alpha**2 * np.eye(N)
    A, b = impose_bc(A.astype(complex), BcSpec("dirichlet"), grid, np.asarray(rhs, dtype=complex))
    return np.linalg.solve(A, b)


def _stream_of_div_part(f: PeriodicField) -> dict:
    D = f.grid.d(1)
    out = {}
    for n, (a, b) in f.modes.items():
        al = _alpha(n, f.L)
        curl = 1j * al * b - D @ a
        out[n] = _dirichlet_poisson(f.grid, al, curl)
    return out


def project_p(f: PeriodicField) -> PeriodicField:
    """Divergence-free, zero-flux part ``grad_perp phi_d`` with ``-Lap phi_d = curl u``, ``phi_d = 0`` on the walls."""
    D = f.grid.d(1)
    modes = {}
    for n, phi in _stream_of_div_part(f).items():
        modes[n] = (D @ phi, -1j * _alpha(n, f.L) * phi)
    return PeriodicField.from_modes(f.L, f.grid, modes)


@dataclass
class HodgeParts:
    curl_part: PeriodicField
    div_part: PeriodicField
    constant: complex

    def constant_field(self, like: PeriodicField) -> PeriodicField:
        z = np.zeros(like.grid.size, dtype=complex)
        return PeriodicField.from_modes(like.L, like.grid, {0: (z + self.constant, z)})


def hodge_decompose(f: PeriodicField) -> HodgeParts:
    """``u = grad phi_c + grad_perp phi_d + A (1, 0)`` with ``A`` the mean of ``u1``."""
    div = project_p(f)
    e1 = PeriodicField.from_modes(f.L, f.grid, {0: (np.ones(f.grid.size), np.zeros(f.grid.size))})
    A = complex(f.inner(e1) / (2 * f.L))
    curl = f - div - e1.scaled(A)
    return HodgeParts(PeriodicField.from_modes(f.L, f.grid, curl.modes), div, A)


def recover_pressure(G: PeriodicField, tol: float = 1e-8) -> ScalarField:
    """``q`` with ``grad q = G`` and zero mean; ``G`` must be curl-free."""
    scale = max(G.norm(), 1e-300)
    if project_p(G).norm() > tol * scale:
        raise NotCurlFreeError("field has a divergence-free component")
    D = G.grid.d(1)
    w = G.grid.weights
    modes = {}
    slope = 0j
    for n, (a, b) in G.modes.items():
        al = _alpha(n, G.L)
        if n != 0:
            modes[n] = a / (1j * al)
            continue
        slope = complex(0.5 * np.sum(w * a))
        # q0' = b with zero weighted mean
        M = np.vstack([D, w[None, :]])
        rhs = np.concatenate([b, [0.0]])
        q0, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        modes[0] = q0
    return ScalarField(G.L, G.grid, modes, slope)


# --------------------------------------------------------------------------
# per-mode evolution


@dataclass(frozen=True, eq=False)
class ModeGenerator:
    """``d psi/dt = G psi`` on interior stream-function unknowns of mode ``n``.

    ``Q`` is the energy metric ``||psi'||^2 + alpha^2 ||psi||^2`` with
    ``psi = lift @ state``; the eigenvalues of ``-G`` are ``Lambda = eps Lambda_hat``.
    """

    n: int
    alpha: float
    beta: float
    epsilon: float
    L: float
    G: np.ndarray
    Q: GramMetric
    bc: str
    flow: BaseFlow
    form: str = "stream"
    lift: np.ndarray = field(repr=False, default=None)

    def spectrum(self) -> np.ndarray:
        return -eigenvalues(self.G)


def _energy_gram(grid: SpectralGrid, alpha: float, P: np.ndarray) -> np.ndarray:
    D = grid.d(1)
    w = grid.weights
    G = (D.T @ (w[:, None] * D) + alpha**2 * np.diag(w)).astype(complex)
    return P.conj().T @ G @ P


def mode_generator(n: int, epsilon: float, L: float, flow: BaseFlow, bc: str = "S",
                   grid: Optional[SpectralGrid] = None, form: str = "auto") -> ModeGenerator:
    """Evolution of Fourier mode ``n``: ``M psi_t = K psi`` with ``M = D^2 - alpha^2`` and
    ``K = eps M^2 - i alpha U M + i alpha U''``.

    ``form='stream'`` eliminates the boundary rows of ``(M, K)`` directly and
    reproduces the Orr-Sommerfeld pencil discretization exactly.
    ``form='vorticity'`` (traction walls only) evolves ``omega = M psi``, which
    vanishes at the walls there: ``omega_t = eps M omega - i alpha U omega +
    i alpha U'' M_D^{-1} omega`` with the Dirichlet Laplacian ``M_D``. The
    stream form with ``psi'' = 0`` rows has spurious transient growth of order
    ``eps n^4`` in the energy norm; ``'auto'`` picks vorticity for ``S`` and
    stream for ``D``.
    """
    if n == 0:
        raise ValueError("mode n must be non-zero")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    bc = bc.upper()
    if form == "auto":
        form = "vorticity" if bc == "S" else "stream"
    if form not in ("stream", "vorticity") or (form == "vorticity" and bc != "S"):
        raise ValueError(f"form {form!r} not available for bc {bc!r}")
    grid = grid or flow.grid
    flow = flow.on(grid)
    alpha = _alpha(abs(n), L)
    N = grid.size
    I = np.eye(N)
    M = grid.d(2) - alpha**2 * I
    if form == "stream":
        U = np.diag(flow.u)
        K = epsilon * (M @ M) - 1j * alpha * (U @ M) + 1j * alpha * np.diag(flow.d2u)
        red = reduce_bordered(bc_spec(bc), grid)
        G = solve_linear_matrix(red.reduce(M.astype(complex)), red.reduce(K))
        lift = red.lift.astype(complex)
    else:
        red = reduce_bordered(BcSpec("dirichlet"), grid)
        Md = red.reduce(M).astype(complex)
        inner = red.interior
        Mdinv = solve_linear_matrix(Md, np.eye(Md.shape[0], dtype=complex))
        G = (epsilon * Md - 1j * alpha * np.diag(flow.u[inner])
             + 1j * alpha * np.diag(flow.d2u[inner]) @ Mdinv)
        lift = red.lift @ Mdinv
    Q = GramMetric.from_gram(_energy_gram(grid, alpha, lift))
    return ModeGenerator(n, alpha, alpha / epsilon, epsilon, L, G, Q, bc, flow, form, lift)


def semigroup_norm_curve(gen: ModeGenerator, ts: Sequence[float]) -> np.ndarray:
    """``||exp(t G)||_Q`` for every ``t``; raises :class:`ExpmOverflowError` on overflow."""
    return expm_norm_curve(gen.G, list(ts), metric=gen.Q)


def pi_decay_rate(epsilon: float, bc: str = "S", n: int = 64) -> float:
    """Decay rate of the ``x1``-independent heat problem for ``u1``.

    No-slip gives Dirichlet ends (first eigenvalue); traction gives Neumann
    ends on mean-free data (second eigenvalue).
    """
    grid = build_grid(n)
    A = -grid.d(2).astype(complex)
    kind = {"D": "dirichlet", "S": "neumann"}[bc.upper()]
    ev = np.sort(bordered_real(A, kind, grid))
    if kind == "dirichlet":
        return float(epsilon * ev[0])
    return float(epsilon * ev[ev > 1e-8][0])


def bordered_real(A, kind: str, grid: SpectralGrid) -> np.ndarray:
    from .spectral_core import bordered_eigenvalues

    ev = bordered_eigenvalues(A, BcSpec(kind), grid)
    return np.asarray(ev).real


def gearhart_pruss_bound(M_hat: float, omega_hat: float, omega: float, r_omega: float):
    """``t -> M_hat (1 + 2 M_hat (omega - omega_hat)/r) exp(-omega t)``."""
    if M_hat < 1:
        raise ValueError("M_hat must be >= 1")
    if not omega > omega_hat:
        raise ValueError("omega must exceed omega_hat")
    if not r_omega > 0:
        raise ValueError("r_omega must be positive")
    coef = M_hat * (1.0 + 2.0 * M_hat * (omega - omega_hat) / r_omega) if np.isfinite(r_omega) else M_hat

    def bound(t):
        return coef * np.exp(-omega * np.asarray(t, dtype=float))

    bound.coefficient = coef
    return bound


def vertical_line_resolvent_sup(gen: ModeGenerator, omega: float, n_grid: int = 201) -> float:
    """``sup_y ||(-G - (omega + i y))^{-1}||_Q`` by grid search plus local refinement."""
    T = -gen.G
    ev = eigenvalues(T)
    lo = float(min(ev.imag.min(), 0.0)) - 1.0
    hi = float(max(ev.imag.max(), 0.0)) + 1.0
    ys = np.unique(np.concatenate([np.linspace(lo, hi, n_grid), ev.imag]))
    Tq = gen.Q.from_euclid_right(gen.Q.to_euclid(T))
    I = np.eye(T.shape[0])

    def rn(y):
        s = smallest_singular_value(Tq - complex(omega, y) * I)
        return 1.0 / s if s > 0 else math.inf

    vals = np.array([rn(y) for y in ys])
    best = float(vals.max())
    for i in np.argsort(vals)[-3:]:
        a = ys[max(i - 1, 0)]
        b = ys[min(i + 1, ys.size - 1)]
        if b > a:
            r = minimize_scalar(lambda y: -rn(y), bounds=(a, b), method="bounded",
                                options={"xatol": 1e-10 * max(1.0, abs(ys[i]))})
            best = max(best, -float(r.fun))
    return best


def t_grid(epsilon: float, beta1: float, points: int = 25) -> np.ndarray:
    s = epsilon * beta1 ** (2.0 / 3.0)
    return np.geomspace(1e-2 / s, 20.0 / s, points)


@dataclass
class RateReport:
    flow: str
    bc: str
    epsilon: float
    L: float
    upsilon: float
    beta1: float
    modes: tuple
    t: np.ndarray
    curves: dict
    weighted_sup: float
    tail_slope: float
    passed: bool
    apriori_ok: bool
    prefactor_note: str = "prefactor reported, not gated"

    def to_json(self) -> str:
        return json.dumps({"upsilon": float(f"{self.upsilon:.17g}"),
                           "sup_weighted": float(f"{self.weighted_sup:.17g}"),
                           "pass": bool(self.passed)})

    def curve_csv(self, n: int) -> str:
        lines = ["t,norm"]
        for t, v in zip(self.t, self.curves[n]):
            lines.append(f"{t:.17g},{v:.17g}")
        return "\n".join(lines) + "\n"


def _check_hypothesis(flow: BaseFlow) -> str:
    if not flow.in_s_r:
        raise HypothesisError(f"flow {flow.name!r} has a critical point (inf|U'| = 0)")
    if flow.delta2 < DELTA2_MAX:
        return "nearly-couette"
    if flow.inf_abs_d2u > 0:
        return "convex"
    raise HypothesisError(f"flow {flow.name!r} is neither nearly Couette nor convex")


def theorem_rate_check(flow: BaseFlow, epsilon: float, L: float, bc: str, upsilon: float,
                       n_modes: int = 4, grid: Optional[SpectralGrid] = None,
                       tail: int = 6, slope_tol: float = 1e-3) -> RateReport:
    """Sup over modes ``1..n_modes`` of ``exp(eps upsilon beta1^{2/3} t) ||exp(t G_n)||_Q``.

    The weighted curve is bounded (pass) when its log-slope over the last
    ``tail`` grid points, measured in units of ``eps beta1^{2/3}``, does not
    exceed ``slope_tol``.
    """
    _check_hypothesis(flow)
    beta1 = 2 * math.pi / (L * epsilon)
    grid = grid or build_grid(max(128, flow.grid.n))
    ts = t_grid(epsilon, beta1)
    rate = epsilon * beta1 ** (2.0 / 3.0)
    curves = {}
    weighted = np.zeros(ts.size)
    bound = np.exp(0.5 * flow.sup_du * ts)
    apriori = True
    for n in range(1, n_modes + 1):
        gen = mode_generator(n, epsilon, L, flow, bc, grid)
        try:
            c = semigroup_norm_curve(gen, ts)
        except ExpmOverflowError:
            c = np.full(ts.size, math.inf)
        curves[n] = c
        apriori &= bool(np.all(c <= bound + 1e-8))
        weighted = np.maximum(weighted, np.exp(upsilon * rate * ts) * c)
    k = min(tail, ts.size)
    with np.errstate(divide="ignore"):
        lw = np.log(weighted[-k:])
    if not np.all(np.isfinite(lw)):
        slope = math.inf
    else:
        slope = float(np.polyfit(ts[-k:] * rate, lw, 1)[0])
    sup = float(np.max(weighted))
    return RateReport(flow.name, bc.upper(), epsilon, L, upsilon, beta1, tuple(range(1, n_modes + 1)), ts,
                      curves, sup, slope, bool(slope <= slope_tol and np.isfinite(sup)), apriori)
