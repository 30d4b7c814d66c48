"""Acceptance suite: one test per criterion, each reporting PASS/FAIL in the terminal summary."""
import cmath
import json
import math

import numpy as np
import pytest
from scipy import special

from shearspec import airy_special as asp
from shearspec import constrained_spectra as cs
from shearspec.cli import run
from shearspec.flow_operators import make_flow, orr_sommerfeld_pencil, os_spectrum, rayleigh_limit
from shearspec.hodge_semigroup import (
    PeriodicField,
    gearhart_pruss_bound,
    hodge_decompose,
    mode_generator,
    pi_decay_rate,
    project_p,
    project_pi,
    recover_pressure,
    semigroup_norm_curve,
    t_grid,
    theorem_rate_check,
    vertical_line_resolvent_sup,
)
from shearspec.resolvent_lab import fit_exponent, optimality_probe, rayleigh_probe, refined_sup
from shearspec.spectral_core import build_grid

BETAS = [1e3, 10**3.5, 1e4, 10**4.5, 1e5]


@pytest.mark.criterion(1, "Poiseuille critical Reynolds number")
def test_criterion_01_critical_reynolds(capsys, stopwatch, detail):
    code = run(["critical-reynolds", "--flow", "poiseuille", "--alpha", "1.02", "--n", "128"])
    out = json.loads(capsys.readouterr().out)
    elapsed = stopwatch()
    R = out["reynolds"]
    detail(f"R = {R:.3f}, rel err {abs(R - 5772) / 5772:.2e}, {elapsed:.1f} s")
    assert code == 0
    assert abs(R - 5772) / 5772 < 0.01
    assert elapsed < 120


@pytest.mark.criterion(2, "Couette spectral stability")
def test_criterion_02_couette_stable(stopwatch, detail):
    grid = build_grid(128)
    flow = make_flow("couette", grid)
    worst = math.inf
    for bc in ("S", "D"):
        for beta in (1e3, 1e4):
            for alpha in (0.5, 1.0, 2.0, beta ** (1 / 3)):
                sp = os_spectrum(orr_sommerfeld_pencil(alpha, beta, flow, bc, grid))
                worst = min(worst, float(sp.Lambda.real.min()))
    elapsed = stopwatch()
    detail(f"min Re Lambda = {worst:.4g}, {elapsed:.1f} s")
    assert worst > 0
    assert elapsed < 120


@pytest.mark.criterion(3, "nu_1 from the half-line Dirichlet complex Airy operator")
def test_criterion_03_nu1(detail):
    omega1 = special.ai_zeros(1)[0][0]
    oracle = cmath.exp(1j * math.pi / 3) * abs(omega1)
    nu1 = asp.constants().nu1
    lead = cs.l_theta_spectrum(None, 40.0, 128)[0]
    detail(f"|nu1 - oracle| = {abs(nu1 - oracle):.2e}, matrix gap {abs(lead - oracle):.2e}")
    assert abs(nu1 - oracle) < 1e-8
    assert abs(lead - oracle) < 1e-5


@pytest.mark.criterion(4, "zero loci of A0(i.)")
def test_criterion_04_zero_loci(detail):
    disc = asp.zeros_in_region(asp._a0i, (-12.13, 12.07, -12.11, 12.09), fprime=asp._a0i_prime)
    inside = [z for z in disc.zeros if abs(z) <= 12]
    args = np.angle(inside)
    window = asp.a0_zero_set()
    th = asp.constants().theta1r
    detail(f"{len(inside)} zeros in |z|<=12, arg range [{args.min():.4f}, {args.max():.4f}], theta1r = {th:.6f}")
    assert inside
    assert np.all((args > math.pi / 6) & (args < math.pi / 2))
    for zs in (disc, window):
        assert zs.complete
        assert zs.winding_total == len(zs.zeros) == sum(w for _, w in zs.cells)
    assert th > 0


@pytest.mark.criterion(5, "mu_0(theta) suite")
def test_criterion_05_mu0(detail):
    slack = []
    for th in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
        p = cs.mu0(th)
        slack.append(p.mu + 0.5 * min(th**2, th**-2))
    nu1 = asp.constants().nu1
    far = abs(cs.mu0(10.0).mu - nu1.real)
    mhat = cs.hat_mu_m()
    window = cs.default_window()
    margin = 0.05
    gaps = []
    for th in (0.5, 1.0, 2.0):
        fz = cs.zeros_of_f(th, window).zeros
        ev = cs.l_theta_spectrum(th, 40.0, 128)
        inner = [e for e in ev if window[0] + margin < e.real < window[1] - margin
                 and window[2] + margin < e.imag < window[3] - margin]
        inner_f = [z for z in fz if window[0] + margin < z.real < window[1] - margin
                   and window[2] + margin < z.imag < window[3] - margin]
        assert len(inner) == len(inner_f)
        gaps += [min(abs(z - e) for e in ev) for z in inner_f]
        gaps += [min(abs(e - z) for z in fz) for e in inner]
    detail(f"min slack {min(slack):.3g}, |mu0(10)-Re nu1| = {far:.3g}, hat mu_m = {mhat:.6f}, "
           f"F/matrix gap {max(gaps):.2e}")
    assert min(slack) >= -1e-8
    assert far <= 0.1
    assert mhat > 0
    assert max(gaps) < 1e-4


@pytest.mark.criterion(6, "interlacing of delta(alpha)")
def test_criterion_06_interlacing(stopwatch, detail):
    w = special.ai_zeros(6)[0]
    roots = cs.interlaced_roots(5)
    counts = []
    for k in range(5):
        a, b = -w[k], -w[k + 1]
        mesh = np.arange(a + 1e-6, b - 1e-6, 1e-3)
        vals = np.array([cs.delta_alpha(x) for x in mesh])
        counts.append(int(np.sum(np.sign(vals[1:]) != np.sign(vals[:-1]))))
        assert a < roots[k] < b
    elapsed = stopwatch()
    detail(f"sign changes per interval {counts}, {elapsed:.1f} s")
    assert counts == [1] * 5
    assert elapsed < 10


@pytest.mark.criterion(7, "resolvent scaling exponents")
def test_criterion_07_resolvent_scaling(stopwatch, detail):
    slopes = {}
    for name in ("couette", "nearly:0.05"):
        flow = make_flow(name)
        for bc in ("S", "D"):
            sup = {b: refined_sup(flow, bc, b)[0] for b in BETAS}
            slopes[(name, bc)] = fit_exponent(sup, (-0.95, -0.70))
    ratios = {}
    for bc in ("S", "D"):
        flow = make_flow("convex:0.5")
        scaled = [refined_sup(flow, bc, b)[0] * b**0.45 for b in BETAS]
        ratios[bc] = max(scaled) / min(scaled)
    elapsed = stopwatch()
    detail(", ".join(f"{n}/{bc} slope {f.slope:.3f}" for (n, bc), f in slopes.items())
           + f", convex ratios S {ratios['S']:.2f} D {ratios['D']:.2f}, {elapsed:.0f} s")
    assert all(f.passed for f in slopes.values())
    assert all(r < 10 for r in ratios.values())
    assert elapsed < 900


def _closed_form_couette(x):
    # limit solution of x(-phi'') = 1, phi(+-1) = 0, at nu = 0
    return -x * np.log(np.abs(x))


@pytest.mark.criterion(8, "Rayleigh estimates and optimality probe")
def test_criterion_08_rayleigh(detail):
    probes = {name: rayleigh_probe(make_flow(name), 2.0, (1e-1, 1e-2, 1e-3)) for name in ("nearly:0.05", "convex:0.5")}
    flow = make_flow("couette")
    lim = rayleigh_limit(0.0, 0.0, flow, lambda x: np.ones_like(np.asarray(x, dtype=float)) + 0j)
    x = np.linspace(-1, 1, 4001)
    x = x[np.abs(x) > 0.05]
    err = float(np.max(np.abs(lim.phi(x) - _closed_form_couette(x))))
    opt = optimality_probe(flow, 0.0, (1e-2, 1e-3))
    worst = max(max(p.ratios.values()) for p in probes.values())
    detail(f"max probe ratio {worst:.3f}, closed-form err {err:.2e}, optimality {opt.values}")
    for p in probes.values():
        assert all(r < 20 for r in p.ratios.values())
    assert err < 1e-5
    assert opt.bounded_below


@pytest.mark.criterion(9, "Hodge and projection suite")
def test_criterion_09_hodge(stopwatch, detail):
    worst = dict.fromkeys(("pi", "p", "comm", "recon", "orth", "press"), 0.0)
    for seed in range(100):
        f = PeriodicField.random(seed=seed)
        nf = f.norm()
        P, Pi = project_p(f), project_pi(f)
        h = hodge_decompose(f)
        e = h.constant_field(f)
        G = h.curl_part + e
        q = recover_pressure(G)
        worst["pi"] = max(worst["pi"], (project_pi(Pi) - Pi).norm() / nf)
        worst["p"] = max(worst["p"], (project_p(P) - P).norm() / nf)
        worst["comm"] = max(worst["comm"], (project_pi(P) - project_p(Pi)).norm() / nf)
        worst["recon"] = max(worst["recon"], (f - h.curl_part - h.div_part - e).norm() / nf)
        worst["orth"] = max(worst["orth"], abs(h.curl_part.inner(h.div_part)) / nf**2,
                            abs(h.curl_part.inner(e)) / nf**2, abs(h.div_part.inner(e)) / nf**2)
        worst["press"] = max(worst["press"], (q.gradient() - G).norm() / G.norm())
    elapsed = stopwatch()
    detail(", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f} s")
    assert worst["pi"] < 1e-14
    assert worst["p"] < 1e-10
    assert worst["comm"] < 1e-10
    assert worst["recon"] < 1e-10
    assert worst["orth"] < 1e-10
    assert worst["press"] < 1e-9
    assert elapsed < 30


@pytest.mark.criterion(10, "semigroup suite")
def test_criterion_10_semigroup(detail):
    eps, L = 1e-3, 6.0
    rates = [abs(pi_decay_rate(eps, bc) - eps * math.pi**2 / 4) for bc in ("S", "D")]
    flow = make_flow("couette")
    ups = {"S": 0.5 * asp.constants().nu1.real, "D": 0.5 * cs.hat_mu_m()}
    reports = {bc: theorem_rate_check(flow, eps, L, bc, u, n_modes=4) for bc, u in ups.items()}
    beta1 = 2 * math.pi / (L * eps)
    omega = eps * 0.3 * beta1 ** (2 / 3)
    ts = t_grid(eps, beta1)
    env_ratio = 0.0
    for bc in ("S", "D"):
        gen = mode_generator(1, eps, L, flow, bc)
        r = 1.0 / vertical_line_resolvent_sup(gen, omega)
        env = gearhart_pruss_bound(1.0, -0.5 * flow.sup_du, omega, r)
        env_ratio = max(env_ratio, float(np.max(semigroup_norm_curve(gen, ts) / env(ts))))
    detail(f"pi-rate err {max(rates):.1e}, weighted sup S {reports['S'].weighted_sup:.3g} "
           f"D {reports['D'].weighted_sup:.3g}, curve/envelope max {env_ratio:.3f}")
    assert max(rates) < 1e-8
    assert all(rep.apriori_ok for rep in reports.values())
    assert all(rep.passed for rep in reports.values())
    assert env_ratio <= 1.0


def _moment_sample(theta1r):
    pts = [complex(a, b) for a in (-7, -5, -3, -1, theta1r - 0.5) for b in (-7, -5, -3, -1, 1, 3, 5, 7)]
    return [z for z in pts if abs(z) <= 8]


@pytest.mark.criterion(11, "special-function accuracy")
def test_criterion_11_special_functions(detail):
    rng = np.random.default_rng(11)
    r = rng.uniform(8, 10, 200)
    t = rng.uniform(-math.pi, math.pi, 200)
    z = r * np.exp(1j * t)
    s, a = asp.airy_ai_series(z), asp.airy_ai_asymptotic(z)
    overlap = float(np.max(np.abs(s - a) / np.abs(a)))
    ai0 = abs(asp.airy_ai(0.0) - 1 / (3 ** (2 / 3) * special.gamma(2 / 3)))
    lams = rng.uniform(-2, 2, 20) + 1j * rng.uniform(-3, 3, 20)
    rel = max(abs(asp.f_laplace(l, 0.0) - cmath.exp(-1j * math.pi / 6) * asp.a0(1j * l)) for l in lams)
    th = asp.constants().theta1r
    fam = {}
    for lam in _moment_sample(th):
        m = asp.psi_cap_norms(lam)
        br = math.sqrt(1 + abs(lam) ** 2)
        for k in range(5):
            fam.setdefault(f"L2 k={k}", []).append(m["l2"][k] * br ** ((2 * k - 1) / 4))
        for s_ in range(4):
            fam.setdefault(f"L1 s={s_}", []).append(m["l1"][s_] * br ** (s_ / 2))
        for s_ in range(5):
            fam.setdefault(f"Linf s={s_}", []).append(m["linf"][s_] * br ** ((s_ - 1) / 2))
        fam.setdefault("Psi(0)", []).append(abs(m["at0"]) * br**-0.5)
    ratios = {k: max(v) / min(v) for k, v in fam.items()}
    bad = {k: round(v, 1) for k, v in ratios.items() if not v < 50}
    detail(f"overlap {overlap:.1e}, Ai(0) err {ai0:.1e}, F/A0 err {rel:.1e}, families over 50: {bad or 'none'}")
    assert overlap < 1e-9
    assert ai0 < 1e-15
    assert rel < 1e-8
    assert not bad
