import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from shearspec import airy_special as asp
from shearspec import constrained_spectra as cs


def _lower_bound(th):
    return -0.5 * min(th**2, th**-2) if th > 0 else 0.0


def test_mu0_at_zero_matches_a0_zero_finder():
    p = cs.mu0(0.0)
    assert abs(p.mu - asp.constants().theta1r) < 1e-8
    assert p.residual < 1e-9


def test_mu0_large_theta():
    assert abs(cs.mu0(10.0).mu - asp.constants().nu1.real) <= 0.1


@pytest.mark.parametrize("theta", [0.25, 1.0, 4.0])
def test_mu0_lower_bound(theta):
    p = cs.mu0(theta)
    assert p.mu - _lower_bound(theta) >= -1e-8
    assert p.residual < 1e-9


def test_mu0_rejects_negative_theta():
    with pytest.raises(ValueError):
        cs.mu0(-0.1)


def test_mu0_empty_window():
    assert cs.mu0(1.0, window=(-1.0, 0.5, -2.0, 2.0)) is None


def test_branch_trace_residual_and_endpoint():
    pts = cs.branch_trace(cs.mu0(0.0), 1.0, steps=40)
    assert all(abs(asp.f_laplace(p.lam, p.theta)) < 1e-9 for p in pts)
    assert abs(pts[-1].theta - 1.0) < 1e-12
    assert abs(pts[-1].lam - cs.mu0(1.0).lam) < 1e-7


def test_branch_trace_matches_implicit_derivative():
    # d lambda / d theta = -F_theta / F_lambda at a zero, with both derivatives by quadrature
    m = cs.mu0(0.5)
    slope = cs._branch_rhs(m.lam, m.theta)
    h = 1e-5
    F_th = (asp.f_laplace(m.lam, m.theta + h) - asp.f_laplace(m.lam, m.theta - h)) / (2 * h)
    F_lam = asp.f_laplace_dlambda(m.lam, m.theta)
    assert abs(slope - (-F_th / F_lam)) < 1e-7 * abs(slope)


def test_branch_certificate_envelope():
    pts = cs.branch_trace(cs.mu0(0.0), 1.0, steps=40)
    cert = cs.branch_certificate(pts)
    for th, g, env in cert:
        assert g >= env * 0.95
    assert cert[0][1] == pytest.approx(cert[0][2])


def test_branch_singularity_reported():
    # a start point on a zero of Ai(e^{2 i pi/3} lambda) makes v(0) vanish
    start = cs.BranchPoint(0.0, asp.constants().nu1)
    with pytest.raises(cs.BranchSingularityError) as info:
        cs.branch_trace(start, 0.5, steps=2)
    assert info.value.last is start


@pytest.mark.slow
def test_hat_mu_m_positive():
    m = cs.hat_mu_m()
    assert m > 0
    assert m <= cs.mu0(0.0).mu + 1e-12


def test_hat_mu_0_trivial_collapse():
    fake = lambda th: 0.3 + th
    assert cs.hat_mu_0(0.7, 1.0, 1.0, fake) == pytest.approx(fake(0.7))


@pytest.mark.slow
def test_hat_mu_0_two_branches():
    m1 = cs.mu0(1.0).mu
    m_half = cs.mu0(0.5).mu
    ref = min(m1, 4 * m_half)
    assert abs(cs.hat_mu_0(1.0, 1.0, 8.0) - ref) < 1e-7


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_hat_mu_0_formula(theta, jm, jp):
    f = lambda t: math.cos(t) - 0.2 * t
    ref = min(jm ** (2 / 3) * f(jm ** (-1 / 3) * theta), jp ** (2 / 3) * f(jp ** (-1 / 3) * theta))
    assert cs.hat_mu_0(theta, jm, jp, f) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_hat_mu_0_rejects_nonpositive_shear():
    with pytest.raises(ValueError):
        cs.hat_mu_0(1.0, 0.0, 1.0, lambda t: t)


def test_delta_at_zero():
    assert cs.delta_alpha(0.0) == 0.0


def test_delta_single_root_first_interval():
    w = special.ai_zeros(2)[0]
    mesh = np.arange(-w[0] + 1e-6, -w[1] - 1e-6, 1e-3)
    vals = np.array([cs.delta_alpha(a) for a in mesh])
    assert int(np.sum(np.sign(vals[1:]) != np.sign(vals[:-1]))) == 1


def test_interlaced_roots_brackets():
    w = special.ai_zeros(6)[0]
    r = cs.interlaced_roots(5)
    assert len(r) == 5
    for k in range(5):
        assert -w[k] < r[k] < -w[k + 1]
        assert abs(cs.delta_alpha(r[k])) < 1e-8


def test_delta_pole_proximity():
    w1 = special.ai_zeros(1)[0][0]
    with pytest.raises(ZeroDivisionError):
        cs.delta_alpha(float(w1))


def test_matrix_leading_eigenvalue_theta_one():
    ev = cs.l_theta_spectrum(1.0, 40.0, 128)
    assert abs(ev[0] - cs.mu0(1.0).lam) < 1e-4


def test_matrix_large_theta_near_nu1():
    ev = cs.l_theta_spectrum(20.0, 40.0, 128)
    assert abs(ev[0] - asp.constants().nu1) < 0.05


def test_matrix_dirichlet_rotated_airy_zeros():
    ev = cs.l_theta_spectrum(None, 40.0, 128)
    w = special.ai_zeros(3)[0]
    for k in range(3):
        target = cmath.exp(1j * math.pi / 3) * abs(w[k])
        assert np.min(np.abs(ev - target)) < 1e-5


def test_matrix_spectrum_truncation_region():
    ev = cs.l_theta_spectrum(0.5, 40.0, 128)
    assert np.all(np.abs(ev.imag) <= 20.0)
    assert np.all(np.diff(ev.real) >= 0)


def test_matrix_spectrum_rejects_small_grid():
    with pytest.raises(ValueError):
        cs.l_theta_spectrum(1.0, 20.0, 128)
    with pytest.raises(ValueError):
        cs.l_theta_spectrum(1.0, 40.0, 64)


def test_matrix_spectrum_stable_under_domain_doubling():
    a = cs.l_theta_spectrum(1.0, 40.0, 128)[0]
    b = cs.l_theta_spectrum(1.0, 80.0, 256, check=False)[0]
    assert abs(a - b) < 1e-6


def test_curve_csv_header_and_rows():
    pts = [cs.BranchPoint(0.5, 1.0 + 2.0j), None, cs.BranchPoint(1.0, -0.25 + 0.5j)]
    lines = cs.curve_csv(pts).strip().splitlines()
    assert lines[0] == "theta,mu0,im_lambda,mu0_plus_half_theta_sq"
    assert len(lines) == 3
    assert [float(v) for v in lines[2].split(",")] == [1.0, -0.25, 0.5, 0.25]


def test_mu0_curve_points_on_branch():
    pts = cs.mu0_curve(theta_max=0.2, step=0.1)
    assert [p.theta for p in pts] == pytest.approx([0.0, 0.1, 0.2])
    for p in pts:
        assert p.residual < 1e-9
        assert p.mu - _lower_bound(p.theta) >= -1e-8
