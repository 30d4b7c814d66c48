"""Resolvent norms, contour scans, exponent fits and Rayleigh probes."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .flow_operators import (
    BaseFlow,
    OperatorPencil,
    _critical_points,
    orr_sommerfeld_pencil,
    rayleigh_matrix,
    rayleigh_solve,
)
from .spectral_core import BcSpec, SpectralGrid, build_grid, reduce_bordered

__all__ = [
    "ScanRecord",
    "BorderedResolvent",
    "resolvent_norm",
    "alpha_grid",
    "im_grid",
    "adaptive_n",
    "contour_re",
    "scan",
    "sup_by_beta",
    "refined_sup",
    "fit_exponent",
    "FitResult",
    "b_star",
    "rayleigh_probe",
    "optimality_probe",
    "records_csv",
    "fit_report_json",
]

CSV_HEADER = "beta,alpha,re_lambda,im_lambda,resnorm,dxresnorm"


@dataclass(frozen=True)
class ScanRecord:
    beta: float
    alpha: float
    lam: complex
    resnorm: float
    dxresnorm: float

    @property
    def singular(self) -> bool:
        return not np.isfinite(self.resnorm)


class BorderedResolvent:
    """Norms of ``(A - z M)^{-1}`` on the domain encoded by ``bc``.

    Data are measured in the quadrature-weighted L2 norm on the interior
    rows, solutions in the weighted L2 norm of the lifted nodal vector.
    ``ops`` are extra full-grid matrices ``E`` for which ``||E (A - z M)^{-1}||``
    is reported (for instance the first derivative).
    """

    def __init__(self, A, M, bc: BcSpec, grid: SpectralGrid, ops: Sequence = ()):
        red = reduce_bordered(bc, grid)
        self.red = red
        self.grid = grid
        P = red.lift
        w = grid.weights
        wI = w[red.interior]
        G_in = P.conj().T @ (w[:, None] * P)
        L = np.linalg.cholesky(0.5 * (G_in + G_in.conj().T))
        # L^{-H}
        LinvH = sla.solve_triangular(L.conj().T, np.eye(L.shape[0]), lower=False)
        sI = np.sqrt(wI)[:, None]
        self.A0 = sI * (red.reduce(A) @ LinvH)
        self.A1 = sI * (red.reduce(M) @ LinvH)
        sw = np.sqrt(w)[:, None]
        self.E = [sw * (np.asarray(E) @ P @ LinvH) for E in ops]

    def norms(self, z: complex, tol: float = 1e-10, maxiter: int = 300):
        """``(||R||, [||E_k R|| ...])`` with ``R = (A - z M)^{-1}``; ``inf`` when singular."""
        N = self.A0 - z * self.A1
        n = N.shape[0]
        try:
            lu, piv = sla.lu_factor(N, check_finite=False)
        except (ValueError, np.linalg.LinAlgError):
            return math.inf, [math.inf] * len(self.E)
        if np.abs(np.diag(lu)).min() <= 1e-14 * np.abs(np.diag(lu)).max():
            return math.inf, [math.inf] * len(self.E)

        def inv(x):
            return sla.lu_solve((lu, piv), x, check_finite=False)

        def invh(x):
            return sla.lu_solve((lu, piv), x, trans=2, check_finite=False)

        rng = np.random.default_rng(7)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x /= np.linalg.norm(x)
        s = 0.0
        for _ in range(maxiter):
            y = inv(x)
            x2 = invh(y)
            s_new = math.sqrt(np.linalg.norm(x2))
            x = x2 / np.linalg.norm(x2)
            if abs(s_new - s) <= tol * s_new:
                s = s_new
                break
            s = s_new
        else:
            s = 1.0 / float(np.linalg.svd(N, compute_uv=False)[-1])
        scale = np.linalg.norm(N) / math.sqrt(n)
        if not np.isfinite(s) or 1.0 / s < 1e-14 * scale:
            return math.inf, [math.inf] * len(self.E)
        extra = []
        for E in self.E:
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            x /= np.linalg.norm(x)
            t = 0.0
            for _ in range(maxiter):
                y = E @ inv(x)
                x2 = invh(E.conj().T @ y)
                t_new = math.sqrt(np.linalg.norm(x2))
                x = x2 / np.linalg.norm(x2)
                if abs(t_new - t) <= tol * t_new:
                    t = t_new
                    break
                t = t_new
            extra.append(t)
        return s, extra


def _pencil_resolvent(pencil: OperatorPencil, with_derivative: bool) -> BorderedResolvent:
    ops = [pencil.grid.d(1)] if with_derivative else []
    return BorderedResolvent(pencil.b0, pencil.b1, pencil.bc, pencil.grid, ops)


def resolvent_norm(pencil: OperatorPencil, lam: complex, with_derivative: bool = True,
                   _res: Optional[BorderedResolvent] = None) -> tuple:
    """``(||B(lam)^{-1}||, ||d/dx B(lam)^{-1}||)`` in weighted L2; ``inf`` at eigenvalues."""
    res = _res or _pencil_resolvent(pencil, with_derivative)
    s, extra = res.norms(pencil.beta * lam)
    d = extra[0] if extra else math.nan
    return s, d


# --------------------------------------------------------------------------
# scans


def contour_re(beta: float, alpha: float, upsilon: float) -> float:
    """``Re lambda = beta^{-1}(upsilon beta^{2/3} - alpha^2)``."""
    return (upsilon * beta ** (2.0 / 3.0) - alpha**2) / beta


def alpha_grid(beta: float, rule: str = "default") -> list:
    """``'default'``: ``{0, 0.25, 0.5, 1, 2} beta^{1/3}``; ``'wide'`` adds ``4 beta^{1/3}`` and ``{0.5, 1, 2}``."""
    b3 = beta ** (1.0 / 3.0)
    base = [0.0, 0.25 * b3, 0.5 * b3, b3, 2 * b3]
    if rule == "default":
        return base
    if rule == "wide":
        return sorted(set(base + [4 * b3, 0.5, 1.0, 2.0]))
    if rule == "zero":
        return [0.0]
    raise ValueError(f"unknown alpha rule {rule!r}")


def im_grid(flow: BaseFlow, beta: float, n_uniform: int = 41, n_layer: int = 21) -> np.ndarray:
    """41 uniform points on ``[min U - 2, max U + 2]`` plus 21-point layers of width ``5 beta^{-1/3}`` at ``U(+-1)``."""
    lo = float(np.min(flow.u)) - 2.0
    hi = float(np.max(flow.u)) + 2.0
    pts = [np.linspace(lo, hi, n_uniform)]
    half = 2.5 * beta ** (-1.0 / 3.0)
    for uw in (flow.u_minus, flow.u_plus):
        pts.append(np.linspace(uw - half, uw + half, n_layer))
    return np.concatenate(pts)


def adaptive_n(beta: float) -> int:
    """Grid size resolving layers of width ``beta^{-1/3}`` across the channel."""
    n = int(math.ceil(7.0 * beta ** (1.0 / 3.0) / 2.0) * 2)
    return max(128, min(n, 512))


def scan(flow: BaseFlow, bc: str, betas: Sequence[float], alpha_rule="default",
         upsilon: float = 0.5, im: Optional[Callable] = None, n: Optional[int] = None,
         with_derivative: bool = True) -> list:
    """Resolvent norms on the contour ``Re lambda = beta^{-1}(upsilon beta^{2/3} - alpha^2)``.

    ``alpha_rule`` is a rule name for :func:`alpha_grid` or a callable of
    beta; ``im`` maps ``(flow, beta)`` to the Im-lambda grid. Records are
    sorted by ``(beta, alpha, Im lambda)``.
    """
    out = []
    for beta in betas:
        grid = build_grid(n or adaptive_n(beta))
        fl = flow.on(grid) if flow.grid.n != grid.n else flow
        alphas = alpha_rule(beta) if callable(alpha_rule) else alpha_grid(beta, alpha_rule)
        ims = (im or im_grid)(fl, beta)
        for alpha in alphas:
            pencil = orr_sommerfeld_pencil(alpha, beta, fl, bc, grid)
            res = _pencil_resolvent(pencil, with_derivative)
            re = contour_re(beta, alpha, upsilon)
            for y in ims:
                lam = complex(re, y)
                s, d = resolvent_norm(pencil, lam, with_derivative, _res=res)
                out.append(ScanRecord(float(beta), float(alpha), lam, s, d))
    out.sort(key=lambda r: (r.beta, r.alpha, r.lam.imag))
    return out


def sup_by_beta(records: Sequence[ScanRecord], key: str = "resnorm") -> dict:
    sup: dict = {}
    for r in records:
        v = getattr(r, key) if key != "bstar" else (1 + r.alpha) * r.resnorm + r.dxresnorm
        sup[r.beta] = max(sup.get(r.beta, -math.inf), v)
    return dict(sorted(sup.items()))


def refined_sup(flow: BaseFlow, bc: str, beta: float, alpha_rule="default", upsilon: float = 0.5,
                n: Optional[int] = None, top: int = 3) -> tuple:
    """Grid supremum followed by bounded maximization in Im lambda (and alpha).

    Returns ``(sup, records)``; the records are the grid scan for this beta.
    """
    recs = scan(flow, bc, [beta], alpha_rule, upsilon, n=n, with_derivative=False)
    grid = build_grid(n or adaptive_n(beta))
    fl = flow.on(grid) if flow.grid.n != grid.n else flow
    best = max(r.resnorm for r in recs)
    finite = sorted((r for r in recs if np.isfinite(r.resnorm)), key=lambda r: -r.resnorm)
    seen = set()
    ims = im_grid(fl, beta)
    spacing = np.diff(np.sort(ims))
    for r in finite[: max(top * 3, top)]:
        k = (r.alpha, round(r.lam.imag, 9))
        if k in seen:
            continue
        seen.add(k)
        if len(seen) > top:
            break
        pencil = orr_sommerfeld_pencil(r.alpha, beta, fl, bc, grid)
        res = _pencil_resolvent(pencil, False)
        re = contour_re(beta, r.alpha, upsilon)
        y0 = r.lam.imag
        h = float(np.max(spacing))
        near = np.sort(ims)
        i = int(np.searchsorted(near, y0))
        lo = near[max(i - 1, 0)]
        hi = near[min(i + 1, near.size - 1)]
        if hi <= lo:
            lo, hi = y0 - h, y0 + h

        def neg(y):
            s, _ = res.norms(beta * complex(re, y))
            return -s if np.isfinite(s) else -1e300

        sol = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6 * max(1, abs(y0))})
        best = max(best, -float(sol.fun))
    return best, recs


@dataclass
class FitResult:
    slope: float
    intercept: float
    residual: float
    betas: tuple
    sups: tuple
    band: tuple = ()

    @property
    def passed(self) -> Optional[bool]:
        if not self.band:
            return None
        return self.band[0] <= self.slope <= self.band[1]


def fit_exponent(data, band: Sequence[float] = ()) -> FitResult:
    """Least-squares line through ``(log beta, log sup)``.

    ``data`` is a list of :class:`ScanRecord` (sup taken per beta) or a
    mapping ``beta -> sup``. Needs at least three distinct betas.
    """
    sup = dict(data) if isinstance(data, dict) else sup_by_beta(data)
    betas = np.array(sorted(sup))
    if betas.size < 3:
        raise ValueError("need at least three distinct beta values")
    vals = np.array([sup[b] for b in betas])
    x, y = np.log(betas), np.log(vals)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return FitResult(float(coef[0]), float(coef[1]), resid, tuple(betas.tolist()), tuple(vals.tolist()),
                     tuple(band))


def b_star(upsilon: float, epsilon: float, L: float, flow: BaseFlow, bc: str,
           alpha_rule="default", betas_factor: Sequence[float] = (1, 2, 4, 8),
           n: Optional[int] = None) -> dict:
    """Discrete ``sup [(1 + alpha)||B^{-1}|| + ||d/dx B^{-1}||]`` over ``beta = k beta_1``.

    ``beta_1 = 2 pi/(L epsilon)``. Returns the value with the beta grid and
    the per-beta suprema so the truncation is explicit.
    """
    beta1 = 2 * math.pi / (L * epsilon)
    if beta1 < 500:
        raise ValueError("L*epsilon too large: beta_1 < 500")
    betas = [k * beta1 for k in betas_factor]
    recs = scan(flow, bc, betas, alpha_rule, upsilon, n=n, with_derivative=True)
    per = sup_by_beta(recs, "bstar")
    return {"value": max(per.values()), "beta1": beta1, "betas": betas, "per_beta": per,
            "records": recs}


# --------------------------------------------------------------------------
# Rayleigh probes


def _nu_samples(flow: BaseFlow, fractions=(-0.5, 0.0, 0.5)) -> list:
    a, b = flow.u_minus, flow.u_plus
    lo, hi = min(a, b), max(a, b)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return [mid + f * half for f in fractions]


def _box(a: float, b: float, height: float):
    def v(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= a) & (x <= b), height, 0.0) + 0j

    return v


@dataclass
class ProbeReport:
    values: dict
    ratios: dict
    bounded: dict
    mu_list: tuple
    limit: float = 20.0
    flags: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "mu": list(self.mu_list),
            "values": {k: [float(f"{x:.17g}") for x in v] for k, v in self.values.items()},
            "max_over_min": {k: float(f"{v:.17g}") for k, v in self.ratios.items()},
            "bounded": self.bounded,
        })


def rayleigh_probe(flow: BaseFlow, p: float = 2.0, mu_list: Sequence[float] = (1e-1, 1e-2, 1e-3),
                   alpha_list: Sequence[float] = (0.0, 1.0, 4.0), nus: Optional[Sequence[float]] = None,
                   limit: float = 20.0) -> ProbeReport:
    """Scaled solution norms of the Rayleigh equation as ``Re lambda = mu`` shrinks.

    For each mu the sup over ``nu`` (default: centre and quarter points of
    the range of U) and ``alpha`` is taken of

    * ``log``: ``||A^{-1} 1||_{1,2} / log(1/mu)``,
    * ``w1p``: ``||A^{-1} v||_{1,2} / (||v'||_p + ||v||_oo)`` over smooth samples,
    * ``lp``: ``mu^{1/p} ||A^{-1} v||_{1,2} / ||v||_p`` over smooth samples and
      boxes ``1[x_nu, x_nu + mu]`` at the critical point.

    Each family is bounded when max/min over mu stays below ``limit``.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    nus = list(nus) if nus is not None else _nu_samples(flow)
    smooth = [
        (lambda x: np.cos(0.5 * np.pi * np.asarray(x)) + 0j, 0.5 * math.pi, 1.0),
        (lambda x: np.exp(np.asarray(x)) + 0j, None, math.e),
        (lambda x: (1 + np.asarray(x) ** 2) + 0j, None, 2.0),
    ]
    xs = np.linspace(-1, 1, 20001)

    def lp(vals):
        return float(np.trapezoid(np.abs(vals) ** p, xs) ** (1 / p))

    vals = {"log": [], "w1p": [], "lp": []}
    one = lambda x: np.ones_like(np.asarray(x, dtype=float)) + 0j  # noqa: E731
    for mu in mu_list:
        r_log = r_w = r_lp = 0.0
        for nu in nus:
            crit = _critical_points(flow, nu)
            for alpha in alpha_list:
                lam = complex(mu, nu)
                s1 = rayleigh_solve(lam, alpha, flow, one, breaks=crit)
                r_log = max(r_log, s1.h1_norm / math.log(1.0 / mu))
                for f, _, _ in smooth:
                    fx = f(xs)
                    dfx = np.gradient(fx, xs)
                    sol = rayleigh_solve(lam, alpha, flow, f, breaks=crit)
                    r_w = max(r_w, sol.h1_norm / (lp(dfx) + float(np.max(np.abs(fx)))))
                    r_lp = max(r_lp, mu ** (1 / p) * sol.h1_norm / lp(fx))
                for xc in crit:
                    a, b = xc, min(xc + mu, 1.0)
                    box = _box(a, b, 1.0)
                    sol = rayleigh_solve(lam, alpha, flow, box, breaks=sorted({a, b, *crit}))
                    norm_p = (b - a) ** (1 / p)
                    r_lp = max(r_lp, mu ** (1 / p) * sol.h1_norm / norm_p)
        vals["log"].append(float(r_log))
        vals["w1p"].append(float(r_w))
        vals["lp"].append(float(r_lp))
    ratios = {k: float(max(v) / min(v)) for k, v in vals.items()}
    bounded = {k: bool(r < limit) for k, r in ratios.items()}
    return ProbeReport(vals, ratios, bounded, tuple(mu_list), limit)


@dataclass
class OptimalityReport:
    nu: float
    mu_list: tuple
    values: list
    flags: list
    method: str

    @property
    def bounded_below(self) -> Optional[bool]:
        v = [x for x in self.values if x is not None]
        if len(v) < 2:
            return None
        return min(v) > 0.1 * max(v)


def optimality_probe(flow: BaseFlow, nu: float, mu_list: Sequence[float] = (1e-2, 1e-3),
                     method: str = "ode", n: int = 128, alpha: float = 0.0,
                     rtol: float = 1e-12) -> OptimalityReport:
    """``mu^{1/2} ||phi_mu||_{1,2}`` for box data ``v = mu^{-1/2} 1[x_nu, x_nu + mu]``.

    ``phi_mu`` solves the Rayleigh equation at ``lambda = mu + i nu``. With
    ``method='ode'`` the box edges are integration breakpoints and the
    integrator is forced to take at least three steps inside the box; with
    ``method='collocation'`` the Chebyshev grid of size ``n`` is used and a
    box narrower than three local node spacings is flagged and skipped.
    """
    a, b = flow.u_minus, flow.u_plus
    if not (min(a, b) < nu < max(a, b)):
        raise ValueError("nu must lie strictly inside the range of U")
    crit = _critical_points(flow, nu)
    xc = crit[0]
    values, flags = [], []
    for mu in mu_list:
        box = _box(xc, xc + mu, mu ** -0.5)
        if method == "ode":
            sol = rayleigh_solve(complex(mu, nu), alpha, flow, box, breaks=[xc, xc + mu / 3, xc + 2 * mu / 3, xc + mu], rtol=rtol,
                                atol=1e-2 * rtol)
            values.append(math.sqrt(mu) * sol.h1_norm)
            flags.append(None)
            continue
        grid = build_grid(n)
        x = grid.nodes
        j = int(np.argmin(np.abs(x - xc)))
        h = abs(x[max(j - 1, 0)] - x[min(j + 1, grid.n)]) / 2
        if mu < 3 * h:
            values.append(None)
            flags.append("under-resolved")
            continue
        fl = flow.on(grid)
        A = rayleigh_matrix(complex(mu, nu), alpha, fl, grid)
        rhs = box(x)
        rhs[[0, grid.n]] = 0.0
        phi = np.linalg.solve(A, rhs)
        dphi = grid.d(1) @ phi
        w = grid.weights
        h1 = math.sqrt(float(np.sum(w * (np.abs(phi) ** 2 + np.abs(dphi) ** 2))))
        values.append(math.sqrt(mu) * h1)
        flags.append(None)
    return OptimalityReport(float(nu), tuple(mu_list), values, flags, method)


# --------------------------------------------------------------------------
# output


def records_csv(records: Sequence[ScanRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    for r in records:
        w.writerow([f"{r.beta:.17g}", f"{r.alpha:.17g}", f"{r.lam.real:.17g}", f"{r.lam.imag:.17g}",
                    f"{r.resnorm:.17g}", f"{r.dxresnorm:.17g}"])
    return buf.getvalue()


def fit_report_json(fit: FitResult) -> str:
    return json.dumps({
        "slope": float(f"{fit.slope:.17g}"),
        "intercept": float(f"{fit.intercept:.17g}"),
        "residual": float(f"{fit.residual:.17g}"),
        "betas": [float(f"{b:.17g}") for b in fit.betas],
        "sups": [float(f"{s:.17g}") for s in fit.sups],
        "band": list(fit.band),
        "pass": fit.passed,
    })
