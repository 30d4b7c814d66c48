import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearspec.spectral_core import (
    BcSpec,
    bordered_eigenvalues,
    build_grid,
    impose_bc,
    inner_product,
    interpolate,
    reduce_bordered,
    weighted_norm,
)


@pytest.mark.parametrize("n", [7, 9, 6, 4, 8.5])
def test_build_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        build_grid(n)


@pytest.mark.parametrize("n", [8, 16, 32, 64, 128])
def test_grid_invariants(n):
    g = build_grid(n)
    assert g.nodes[0] == 1.0 and g.nodes[-1] == -1.0
    assert np.all(np.diff(g.nodes) < 0)
    np.testing.assert_allclose(g.nodes, np.cos(np.arange(n + 1) * np.pi / n), atol=1e-15)
    for k in range(1, 5):
        assert np.max(np.abs(g.d(k).sum(axis=1))) <= 1e-12 * n**2 * max(1, n ** (2 * (k - 1)) / 1e3)
    assert abs(g.weights.sum() - 2) < 1e-12
    assert np.all(g.weights > 0)


def test_diff_constant_and_linear():
    g = build_grid(8)
    np.testing.assert_allclose(g.d(1) @ np.ones(9), 0, atol=1e-13)
    np.testing.assert_allclose(g.d(1) @ g.nodes, 1, atol=1e-13)


def test_second_derivative_of_cubic():
    g = build_grid(16)
    x = g.nodes
    assert np.max(np.abs(g.d(2) @ x**3 - 6 * x)) < 1e-10


def test_polynomial_exactness_up_to_degree_n():
    g = build_grid(16)
    x = g.nodes
    p = np.polynomial.Polynomial(np.arange(1, 18) / 17.0)
    for k in range(1, 5):
        exact = p.deriv(k)(x)
        assert np.max(np.abs(g.d(k) @ p(x) - exact)) < 1e-7 * max(1, np.max(np.abs(exact)))


def test_spectral_accuracy_exp():
    errs = []
    for n in (8, 16, 32, 64):
        g = build_grid(n)
        f = np.exp(g.nodes)
        errs.append(np.max(np.abs(g.d(1) @ f - f)))
    # super-algebraic: error ratios keep growing until roundoff
    assert errs[1] < errs[0] * 1e-4
    assert errs[2] < 1e-12


def test_inner_product_examples():
    g = build_grid(32)
    one = np.ones(33)
    x = g.nodes
    assert abs(inner_product(g, one, one) - 2) < 1e-13
    assert abs(inner_product(g, one, x)) < 1e-14
    assert abs(inner_product(g, x, x) - 2 / 3) < 1e-12


def test_inner_product_conjugates_first_argument():
    g = build_grid(8)
    f = 1j * np.ones(9)
    assert abs(inner_product(g, f, np.ones(9)) - (-2j)) < 1e-13


def test_inner_product_size_mismatch():
    g = build_grid(8)
    with pytest.raises(ValueError):
        inner_product(g, np.ones(9), np.ones(10))


@pytest.mark.parametrize("deg", range(0, 32))
def test_quadrature_exact_below_n(deg):
    g = build_grid(32)
    exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
    assert abs(g.weights @ g.nodes**deg - exact) < 1e-12


def test_weighted_norm_matches_inner_product():
    g = build_grid(16)
    f = np.sin(g.nodes) + 1j * g.nodes**2
    assert abs(weighted_norm(g, f) ** 2 - inner_product(g, f, f).real) < 1e-13


def test_interpolation_reproduces_smooth_function():
    g = build_grid(32)
    x = np.linspace(-1, 1, 101)
    np.testing.assert_allclose(interpolate(g, np.exp(g.nodes), x), np.exp(x), atol=1e-13)
    np.testing.assert_allclose(interpolate(g, g.nodes**2, g.nodes), g.nodes**2, atol=0)


def test_dirichlet_laplacian_first_eigenvalue():
    g = build_grid(32)
    ev = np.sort(bordered_eigenvalues(-g.d(2), BcSpec("dirichlet"), g).real)
    assert abs(ev[0] - math.pi**2 / 4) < 1e-8


def test_identity_with_dirichlet_rows():
    g = build_grid(8)
    A = impose_bc(np.eye(9), BcSpec("dirichlet"), g)
    e0 = np.zeros(9)
    e0[0] = 1
    np.testing.assert_array_equal(A[0], e0)
    np.testing.assert_array_equal(A[8], e0[::-1])


def test_neumann_mean_constraint_second_eigenvalue():
    # -u'' with u'(1) = 0 and the mean constraint <1, u> = 0 replacing the other row;
    # the operator then lives on mean-free Neumann functions, whose lowest
    # eigenvalue is the second Neumann eigenvalue of (-1, 1).
    g = build_grid(32)
    bc = BcSpec.mixed([0, 32], [g.d(1)[0], g.weights * 1.0], weighted=False)
    A = -g.d(2)
    ev = bordered_eigenvalues(A, bc, g)
    ev = ev[np.argsort(np.abs(ev))]
    assert abs(ev[0] - math.pi**2 / 4) < 1e-8


def test_neumann_kind_zero_and_second_eigenvalue():
    g = build_grid(32)
    ev = np.sort(bordered_eigenvalues(-g.d(2), BcSpec("neumann"), g).real)
    assert abs(ev[0]) < 1e-9
    assert abs(ev[1] - math.pi**2 / 4) < 1e-8


@pytest.mark.parametrize("kind", ["dirichlet", "dirichlet2", "dirichlet4", "neumann"])
def test_impose_bc_preserves_interior_rows(kind):
    g = build_grid(16)
    rng = np.random.default_rng(0)
    M = rng.standard_normal((17, 17)) + 1j * rng.standard_normal((17, 17))
    A = impose_bc(M, BcSpec(kind), g)
    red = reduce_bordered(BcSpec(kind), g)
    np.testing.assert_array_equal(A[red.interior], M[red.interior])


def test_impose_bc_rhs_zeroed():
    g = build_grid(8)
    A, b = impose_bc(np.eye(9), BcSpec("dirichlet4"), g, np.ones(9))
    assert b[0] == b[1] == b[7] == b[8] == 0
    assert np.all(b[2:7] == 1)


def test_constrained_requires_independent_functionals():
    g = build_grid(16)
    f = np.ones(17)
    with pytest.raises(np.linalg.LinAlgError):
        impose_bc(np.eye(17), BcSpec.constrained(f, 2 * f), g)


def test_constrained_bc_needs_two_functionals():
    with pytest.raises(ValueError):
        BcSpec("constrained", functionals=(np.ones(3),))


def test_unknown_bc_kind():
    with pytest.raises(ValueError):
        BcSpec("robin")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=8))
def test_lift_satisfies_boundary_rows(coefs):
    g = build_grid(16)
    for kind in ("dirichlet2", "dirichlet4"):
        red = reduce_bordered(BcSpec(kind), g)
        u_int = np.resize(np.array(coefs, dtype=float), red.interior.size)
        u = red.expand(u_int)
        A = impose_bc(np.zeros((17, 17)), BcSpec(kind), g)
        assert np.max(np.abs(A[list(red.rows)] @ u)) < 1e-9 * (1 + np.max(np.abs(u)))
