import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from shearspec.dense_complex import (
    ExpmOverflowError,
    GramMetric,
    NonConvergenceError,
    NumericallySingularError,
    SingularMatrixError,
    eigenvalues,
    expm,
    expm_norm,
    expm_norm_curve,
    hessenberg,
    operator_norm,
    smallest_singular_value,
    smallest_singular_value_svd,
    solve_linear,
    solve_linear_matrix,
)


def _rand(n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def _match(a, b):
    """Max distance after greedy nearest matching of two multisets."""
    b = list(b)
    worst = 0.0
    for z in a:
        k = int(np.argmin([abs(z - w) for w in b]))
        worst = max(worst, abs(z - b.pop(k)))
    return worst


def test_solve_identity():
    b = np.array([1 + 2j, -3, 0.5j])
    np.testing.assert_array_equal(solve_linear(np.eye(3), b), b)


def test_solve_diagonal():
    np.testing.assert_allclose(solve_linear(np.diag([1, 2, 4]), np.ones(3)), [1, 0.5, 0.25], rtol=0, atol=1e-16)


def test_solve_random_residual():
    M = _rand(50, 1)
    b = _rand(50, 2)[:, 0]
    x = solve_linear(M, b)
    assert np.linalg.norm(M @ x - b) < 1e-9
    assert np.linalg.norm(M @ x - b) <= 1e-10 * np.linalg.norm(M, 2) * np.linalg.norm(x)


def test_solve_matches_lapack():
    M = _rand(30, 3)
    B = _rand(30, 4)[:, :5]
    np.testing.assert_allclose(solve_linear_matrix(M, B), sla.solve(M, B), atol=1e-11)


def test_solve_singular_carries_pivot():
    M = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError) as info:
        solve_linear(M, np.ones(2))
    assert info.value.pivot == 1


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        solve_linear(np.array([[np.nan, 0], [0, 1]]), np.ones(2))


def test_eigenvalues_diagonal():
    assert _match(eigenvalues(np.diag([1j, -1j, 3])), [1j, -1j, 3]) < 1e-14


def test_eigenvalues_companion():
    # companion matrix of z^2 + 1
    C = np.array([[0, -1], [1, 0]])
    assert _match(eigenvalues(C), [1j, -1j]) < 1e-14


def test_eigenvalues_rotation_trace_det():
    M = np.array([[0.0, 1.0], [-1.0, 0.0]])
    ev = eigenvalues(M)
    assert abs(ev.sum() - np.trace(M)) < 1e-14
    assert abs(np.prod(ev) - np.linalg.det(M)) < 1e-14
    # roots of the characteristic polynomial z^2 - tr z + det
    assert _match(ev, np.roots([1, -np.trace(M), np.linalg.det(M)])) < 1e-14


@pytest.mark.parametrize("n", [5, 40, 120])
def test_eigenvalues_match_lapack(n):
    M = _rand(n, n)
    ev = eigenvalues(M)
    assert ev.size == n
    assert _match(ev, np.linalg.eigvals(M)) < 1e-9 * np.linalg.norm(M, 2)


def test_normal_matrix_matches_diagonalization():
    rng = np.random.default_rng(5)
    Q, _ = np.linalg.qr(_rand(30, 6))
    d = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    M = Q @ np.diag(d) @ Q.conj().T
    assert _match(eigenvalues(M), d) < 1e-9


def test_hessenberg_structure_and_similarity():
    M = _rand(20, 7)
    H = hessenberg(M)
    assert np.max(np.abs(np.tril(H, -2))) == 0
    assert abs(np.trace(H) - np.trace(M)) < 1e-11
    assert abs(np.linalg.norm(H) - np.linalg.norm(M)) < 1e-11


def test_eigenvalue_dimension_cap():
    with pytest.raises(ValueError):
        eigenvalues(np.zeros((1025, 1025)))


def test_eigenvalue_nonconvergence_flagged():
    with pytest.raises(NonConvergenceError) as info:
        eigenvalues(_rand(40, 8), maxit_per_eig=0)
    assert info.value.partial.size == info.value.n_converged


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 25))
def test_eigenvalues_unitary_invariance(seed, n):
    M = _rand(n, seed)
    rng = np.random.default_rng(seed + 1)
    Q = np.eye(n, dtype=complex)
    for _ in range(3):
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v /= np.linalg.norm(v)
        Q = Q @ (np.eye(n) - 2 * np.outer(v, v.conj()))
    a = eigenvalues(M)
    b = eigenvalues(Q.conj().T @ M @ Q)
    assert _match(a, b) < 1e-8 * max(1.0, np.linalg.norm(M, 2))


def test_sigma_min_trivial():
    assert abs(smallest_singular_value(np.eye(4)) - 1) < 1e-14
    assert abs(smallest_singular_value(np.diag([3, 1e-3])) - 1e-3) < 1e-14


def test_sigma_min_dual_method():
    M = _rand(40, 9)
    a = smallest_singular_value(M)
    b = smallest_singular_value_svd(M)
    assert abs(a - b) / b < 1e-7


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_sigma_min_times_inverse_norm(seed):
    M = _rand(12, seed)
    s = smallest_singular_value(M)
    assert abs(s * np.linalg.norm(np.linalg.inv(M), 2) - 1) < 1e-8


def test_sigma_min_with_metric():
    rng = np.random.default_rng(10)
    M = _rand(15, 11)
    R = _rand(15, 12)
    G_out = GramMetric.from_gram(R @ R.conj().T + 15 * np.eye(15))
    G_in = GramMetric.from_weights(rng.uniform(0.5, 2.0, 15))
    # oracle: 1 / sup ||M^{-1} b||_in / ||b||_out from the Gram matrices directly
    Minv = np.linalg.inv(M)
    Go, Gi = G_out.gram, G_in.gram
    # ||Minv b||_in^2 / ||b||_out^2 -> generalized Rayleigh quotient
    A = Minv.conj().T @ Gi @ Minv
    top = sla.eigh(0.5 * (A + A.conj().T), 0.5 * (Go + Go.conj().T), eigvals_only=True)[-1]
    oracle = 1 / math.sqrt(top)
    assert abs(smallest_singular_value(M, (G_out, G_in)) - oracle) / oracle < 1e-8


def test_sigma_min_singular():
    with pytest.raises(NumericallySingularError):
        smallest_singular_value(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_operator_norm_metric_identity():
    M = _rand(10, 13)
    I = GramMetric.identity(10)
    assert abs(operator_norm(M, I, I) - np.linalg.norm(M, 2)) < 1e-12


def test_expm_zero_and_diagonal():
    assert expm_norm(np.zeros((3, 3)), 7.0) == pytest.approx(1.0, abs=1e-15)
    assert expm_norm(np.diag([-1.0, -2.0]), 1.0) == pytest.approx(math.exp(-1), rel=1e-14)


def test_expm_jordan_transient():
    M = np.array([[-1.0, 10.0], [0.0, -1.0]])
    t = 1.0
    # closed form: e^{-t} [[1, 10 t], [0, 1]]
    E = math.exp(-t) * np.array([[1, 10 * t], [0, 1]])
    v = expm_norm(M, t)
    assert v >= math.exp(-1) * 10 * t * (1 - 1e-12)
    assert abs(v - np.linalg.norm(E, 2)) < 1e-13


def test_expm_matches_scipy():
    M = 0.3 * _rand(25, 14)
    np.testing.assert_allclose(expm(M), sla.expm(M), atol=1e-11)
    M = 30 * _rand(8, 15)
    X = expm(M)
    np.testing.assert_allclose(X, sla.expm(M), rtol=1e-8, atol=1e-8 * np.abs(X).max())


def test_expm_norm_with_weights():
    w = np.array([1.0, 4.0])
    M = np.array([[-1.0, 10.0], [0.0, -1.0]])
    Wh = np.diag(np.sqrt(w))
    oracle = np.linalg.norm(Wh @ sla.expm(M) @ np.linalg.inv(Wh), 2)
    assert abs(expm_norm(M, 1.0, GramMetric.from_weights(w)) - oracle) < 1e-13


def test_expm_overflow_flagged():
    with pytest.raises(ExpmOverflowError) as info:
        expm_norm(np.array([[800.0]]), 2.0)
    assert info.value.growth_bound == pytest.approx(800.0)


def test_expm_negative_time():
    with pytest.raises(ValueError):
        expm_norm(np.eye(2), -1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.integers(0, 1000))
def test_expm_submultiplicative(s, t, seed):
    M = _rand(6, seed) - 2 * np.eye(6)
    a, b, c = expm_norm_curve(M, [s, t, s + t])
    assert c <= a * b + 1e-10
