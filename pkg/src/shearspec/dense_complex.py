"""Dense complex linear algebra.

LU solves with partial pivoting, eigenvalues by balancing, Householder
Hessenberg reduction and single-shift complex QR, smallest singular values
under Gram-weighted norms, and a scaling-and-squaring matrix exponential.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.linalg as sla
from numba import njit

__all__ = [
    "SingularMatrixError",
    "NumericallySingularError",
    "NonConvergenceError",
    "ExpmOverflowError",
    "GramMetric",
    "as_complex_matrix",
    "lu_factor",
    "lu_solve",
    "solve_linear",
    "solve_linear_matrix",
    "hessenberg",
    "eigenvalues",
    "smallest_singular_value",
    "operator_norm",
    "expm",
    "expm_norm",
    "expm_norm_curve",
]

EPS = np.finfo(float).eps
EPS_K = EPS


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, pivot: int):
        super().__init__(f"exactly singular pivot at index {pivot}")
        self.pivot = pivot


class NumericallySingularError(np.linalg.LinAlgError):
    def __init__(self, sigma: float, scale: float):
        super().__init__(f"numerically singular: sigma_min={sigma:.3e}, norm={scale:.3e}")
        self.sigma = sigma
        self.scale = scale


class NonConvergenceError(RuntimeError):
    """QR iteration hit its cap; ``partial`` holds the deflated eigenvalues."""

    def __init__(self, partial: np.ndarray, n_converged: int):
        super().__init__(f"QR iteration did not converge ({n_converged} eigenvalues deflated)")
        self.partial = partial
        self.n_converged = n_converged


class ExpmOverflowError(OverflowError):
    def __init__(self, t: float, growth_bound: float):
        super().__init__(f"matrix exponential overflow at t={t}; growth bound exp({growth_bound:.3e} t)")
        self.t = t
        self.growth_bound = growth_bound


def as_complex_matrix(M) -> np.ndarray:
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


@dataclass(frozen=True, eq=False)
class GramMetric:
    """Inner product ``<x, y>_G = x^H G y`` stored through ``G = L L^H``."""

    chol: np.ndarray

    @staticmethod
    def from_gram(G) -> "GramMetric":
        G = np.asarray(G, dtype=complex)
        G = 0.5 * (G + G.conj().T)
        return GramMetric(np.linalg.cholesky(G))

    @staticmethod
    def from_weights(w) -> "GramMetric":
        w = np.asarray(w, dtype=float)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        return GramMetric(np.diag(np.sqrt(w)).astype(complex))

    @staticmethod
    def identity(n: int) -> "GramMetric":
        return GramMetric(np.eye(n, dtype=complex))

    @property
    def gram(self) -> np.ndarray:
        return self.chol @ self.chol.conj().T

    def to_euclid(self, M) -> np.ndarray:
        """``L^H M``: coordinates in which the metric becomes Euclidean."""
        return self.chol.conj().T @ M

    def from_euclid_right(self, M) -> np.ndarray:
        """``M L^{-H}``."""
        # M L^{-H} = (L^{-1} M^H)^H
        X = sla.solve_triangular(self.chol, np.asarray(M).conj().T, lower=True)
        return X.conj().T


def _weighted(M, metric_out: Optional[GramMetric], metric_in: Optional[GramMetric]) -> np.ndarray:
    A = np.asarray(M, dtype=complex)
    if metric_out is not None:
        A = metric_out.to_euclid(A)
    if metric_in is not None:
        A = metric_in.from_euclid_right(A)
    return A


# --------------------------------------------------------------------------
# LU with partial pivoting


@njit(cache=True)
def _lu_kernel(A):
    n = A.shape[0]
    piv = np.arange(n)
    for k in range(n):
        p = k
        best = abs(A[k, k])
        for i in range(k + 1, n):
            v = abs(A[i, k])
            if v > best:
                best = v
                p = i
        if best == 0.0:
            return piv, k
        if p != k:
            for j in range(n):
                tmp = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = tmp
            t = piv[k]
            piv[k] = piv[p]
            piv[p] = t
        inv = 1.0 / A[k, k]
        for i in range(k + 1, n):
            A[i, k] *= inv
            f = A[i, k]
            if f != 0:
                for j in range(k + 1, n):
                    A[i, j] -= f * A[k, j]
    return piv, -1


@njit(cache=True)
def _lu_solve_kernel(LU, piv, B):
    n = LU.shape[0]
    m = B.shape[1]
    X = np.empty_like(B)
    for i in range(n):
        for c in range(m):
            X[i, c] = B[piv[i], c]
    for i in range(n):
        for k in range(i):
            f = LU[i, k]
            if f != 0:
                for c in range(m):
                    X[i, c] -= f * X[k, c]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            f = LU[i, k]
            if f != 0:
                for c in range(m):
                    X[i, c] -= f * X[k, c]
        inv = 1.0 / LU[i, i]
        for c in range(m):
            X[i, c] *= inv
    return X


def lu_factor(M):
    """Packed LU factors and row permutation, ``P M = L U``."""
    A = np.array(as_complex_matrix(M), copy=True)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    piv, bad = _lu_kernel(A)
    if bad >= 0:
        raise SingularMatrixError(int(bad))
    return A, piv


def lu_solve(factors, b) -> np.ndarray:
    LU, piv = factors
    b = np.asarray(b, dtype=complex)
    vec = b.ndim == 1
    B = b.reshape(-1, 1) if vec else b
    X = _lu_solve_kernel(LU, piv, np.ascontiguousarray(B))
    return X[:, 0] if vec else X


def solve_linear(M, b) -> np.ndarray:
    """Solve ``M x = b`` by Gaussian elimination with partial pivoting."""
    return lu_solve(lu_factor(M), b)


def solve_linear_matrix(M, B) -> np.ndarray:
    return lu_solve(lu_factor(M), np.asarray(B, dtype=complex))


# --------------------------------------------------------------------------
# eigenvalues


@njit(cache=True)
def _balance(A):
    n = A.shape[0]
    radix = 2.0
    done = False
    while not done:
        done = True
        for i in range(n):
            c = 0.0
            r = 0.0
            for j in range(n):
                if j != i:
                    c += abs(A[j, i])
                    r += abs(A[i, j])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= radix * radix
            g = r * radix
            while c >= g:
                f /= radix
                c /= radix * radix
            if (c + r) / f < 0.95 * s:
                done = False
                for j in range(n):
                    A[i, j] /= f
                for j in range(n):
                    A[j, i] *= f


@njit(cache=True)
def _hessenberg_kernel(A):
    n = A.shape[0]
    for k in range(n - 2):
        m = n - k - 1
        v = np.empty(m, dtype=np.complex128)
        nrm = 0.0
        for i in range(m):
            v[i] = A[k + 1 + i, k]
            nrm += v[i].real ** 2 + v[i].imag ** 2
        nrm = np.sqrt(nrm)
        if nrm == 0.0:
            continue
        x0 = v[0]
        if abs(x0) == 0.0:
            ph = 1.0 + 0.0j
        else:
            ph = x0 / abs(x0)
        alpha = -ph * nrm
        v[0] -= alpha
        vn = 0.0
        for i in range(m):
            vn += v[i].real ** 2 + v[i].imag ** 2
        vn = np.sqrt(vn)
        if vn == 0.0:
            continue
        for i in range(m):
            v[i] /= vn
        # left: A[k+1:, :] -= 2 v (v^H A[k+1:, :])
        for j in range(k, n):
            s = 0.0j
            for i in range(m):
                s += np.conj(v[i]) * A[k + 1 + i, j]
            s *= 2.0
            for i in range(m):
                A[k + 1 + i, j] -= v[i] * s
        # right: A[:, k+1:] -= 2 (A[:, k+1:] v) v^H
        for i in range(n):
            s = 0.0j
            for j in range(m):
                s += A[i, k + 1 + j] * v[j]
            s *= 2.0
            for j in range(m):
                A[i, k + 1 + j] -= s * np.conj(v[j])
        for i in range(k + 2, n):
            A[i, k] = 0.0


@njit(cache=True)
def _hqr_kernel(H, maxit):
    n = H.shape[0]
    eig = np.zeros(n, dtype=np.complex128)
    hnorm = 0.0
    for i in range(n):
        for j in range(n):
            a = abs(H[i, j])
            if a > hnorm:
                hnorm = a
    tiny = 1e-300
    hi = n - 1
    its = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = H[0, 0]
            hi -= 1
            continue
        # locate negligible subdiagonal
        l = hi
        while l > 0:
            s = abs(H[l - 1, l - 1]) + abs(H[l, l])
            if s == 0.0:
                s = hnorm
            if abs(H[l, l - 1]) <= EPS_K * s or abs(H[l, l - 1]) < tiny:
                H[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            eig[hi] = H[hi, hi]
            hi -= 1
            its = 0
            continue
        its += 1
        total += 1
        if total > maxit:
            return eig, hi
        a = H[hi - 1, hi - 1]
        b = H[hi - 1, hi]
        c = H[hi, hi - 1]
        d = H[hi, hi]
        if its % 11 == 10:
            shift = d + abs(H[hi, hi - 1].real) + (abs(H[hi - 1, hi - 2].real) if hi - 2 >= l else 0.0)
        else:
            half = 0.5 * (a - d)
            disc = np.sqrt(half * half + b * c)
            m1 = 0.5 * (a + d) + disc
            m2 = 0.5 * (a + d) - disc
            shift = m1 if abs(m1 - d) < abs(m2 - d) else m2
        x = H[l, l] - shift
        y = H[l + 1, l]
        for k in range(l, hi):
            if k > l:
                x = H[k, k - 1]
                y = H[k + 1, k - 1]
            ax = abs(x)
            ay = abs(y)
            if ay == 0.0:
                continue
            r = np.sqrt(ax * ax + ay * ay)
            if ax == 0.0:
                cr = 0.0
                sc = 1.0 + 0.0j
            else:
                cr = ax / r
                sc = (x / ax) * np.conj(y) / r
            j0 = k - 1 if k > l else l
            for j in range(j0, hi + 1):
                t1 = H[k, j]
                t2 = H[k + 1, j]
                H[k, j] = cr * t1 + sc * t2
                H[k + 1, j] = -np.conj(sc) * t1 + cr * t2
            i1 = k + 2 if k + 2 < hi else hi
            for i in range(l, i1 + 1):
                t1 = H[i, k]
                t2 = H[i, k + 1]
                H[i, k] = cr * t1 + np.conj(sc) * t2
                H[i, k + 1] = -sc * t1 + cr * t2
            if k > l:
                H[k + 1, k - 1] = 0.0
    return eig, -1


def hessenberg(M) -> np.ndarray:
    """Upper Hessenberg matrix unitarily similar to ``M``."""
    A = np.array(as_complex_matrix(M), copy=True)
    _hessenberg_kernel(A)
    return A


def eigenvalues(M, balance: bool = True, maxit_per_eig: int = 30) -> np.ndarray:
    """All eigenvalues of a square complex matrix.

    Balancing, Householder reduction to Hessenberg form and single-shift QR
    with Wilkinson shifts (exceptional shifts every eleventh sweep). A
    subdiagonal entry is deflated when it falls below machine epsilon times
    the neighbouring diagonal magnitudes. Raises ``NonConvergenceError``
    (carrying the deflated part) when the iteration cap is hit.
    """
    A = np.array(as_complex_matrix(M), copy=True)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("matrix must be square")
    if n > 1024:
        raise ValueError("dimension above 1024 is outside the supported range")
    if n == 0:
        return np.zeros(0, dtype=complex)
    if balance:
        _balance(A)
    _hessenberg_kernel(A)
    eig, bad = _hqr_kernel(A, maxit_per_eig * n)
    if bad >= 0:
        raise NonConvergenceError(eig[bad + 1 :].copy(), n - bad - 1)
    return eig


# --------------------------------------------------------------------------
# singular values and norms


def smallest_singular_value(
    M,
    metric: Optional[tuple] = None,
    tol: float = 1e-13,
    maxiter: int = 60,
    fallback_dim: int = 256,
    return_method: bool = False,
):
    """Smallest singular value of ``M`` from a metric space to another.

    With ``metric = (G_out, G_in)`` the value is the smallest singular value
    of ``L_out^H M L_in^{-H}``, i.e. ``1/||M^{-1}||`` where the inverse maps
    ``G_out``-measured data to ``G_in``-measured solutions. Computed by
    inverse iteration on ``N^H N`` with a LAPACK LU of ``N``; a full SVD is
    used when the iteration stalls (dimension ``<= fallback_dim``) or to
    confirm the value when requested. Raises ``NumericallySingularError``
    below ``1e-14 ||N||``.
    """
    metric_out, metric_in = metric if metric is not None else (None, None)
    N = _weighted(M, metric_out, metric_in)
    n = N.shape[0]
    if N.shape[1] != n:
        raise ValueError("matrix must be square")
    scale = np.linalg.norm(N, 1)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(N, check_finite=False)
    except (ValueError, np.linalg.LinAlgError):
        raise NumericallySingularError(0.0, scale)
    if np.abs(np.diag(lu)).min() == 0.0:
        raise NumericallySingularError(0.0, scale)
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    sigma = None
    method = "inverse-iteration"
    for _ in range(maxiter):
        z = sla.lu_solve((lu, piv), x, trans=2, check_finite=False)  # N^H z = x
        nz = np.linalg.norm(z)
        s_new = 1.0 / nz
        y = sla.lu_solve((lu, piv), z, check_finite=False)
        x = y / np.linalg.norm(y)
        if sigma is not None and abs(s_new - sigma) <= tol * s_new:
            sigma = s_new
            break
        sigma = s_new
    else:
        sigma = float(np.linalg.svd(N, compute_uv=False)[-1])
        method = "svd"
    # final Rayleigh estimate from the converged vector
    if method == "inverse-iteration":
        z = sla.lu_solve((lu, piv), x, trans=2, check_finite=False)
        sigma = 1.0 / np.linalg.norm(z)
    norm_est = np.linalg.norm(N) / np.sqrt(n)
    if not np.isfinite(sigma) or sigma < 1e-14 * norm_est:
        raise NumericallySingularError(float(sigma), scale)
    return (float(sigma), method) if return_method else float(sigma)


def smallest_singular_value_svd(M, metric: Optional[tuple] = None) -> float:
    """Reference value from a full singular value decomposition."""
    metric_out, metric_in = metric if metric is not None else (None, None)
    N = _weighted(M, metric_out, metric_in)
    return float(np.linalg.svd(N, compute_uv=False)[-1])


def operator_norm(M, metric_out: Optional[GramMetric] = None, metric_in: Optional[GramMetric] = None) -> float:
    """Largest singular value of ``L_out^H M L_in^{-H}``."""
    N = _weighted(M, metric_out, metric_in)
    return float(np.linalg.svd(N, compute_uv=False)[0])


# --------------------------------------------------------------------------
# matrix exponential

_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152


def expm(M) -> np.ndarray:
    """Matrix exponential by scaling and squaring with the [13/13] Pade approximant."""
    A = as_complex_matrix(M)
    n = A.shape[0]
    nrm = np.linalg.norm(A, 1)
    s = 0 if nrm <= _THETA13 else int(np.ceil(np.log2(nrm / _THETA13)))
    A = A / (2.0**s)
    b = _PADE13
    I = np.eye(n, dtype=complex)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I
    R = np.linalg.solve(V - U, V + U)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            R = R @ R
    return R


def _numerical_abscissa(A) -> float:
    H = 0.5 * (A + A.conj().T)
    return float(np.linalg.eigvalsh(H)[-1])


def expm_norm(M, t: float, metric: Optional[GramMetric] = None) -> float:
    """``||exp(t M)||`` in the norm induced by ``metric`` (Euclidean if None)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    A = as_complex_matrix(M)
    if metric is not None:
        A = metric.from_euclid_right(metric.to_euclid(A))
    return expm_norm_curve(A, [t], metric=None)[0]


def expm_norm_curve(M, ts: Iterable[float], metric: Optional[GramMetric] = None) -> np.ndarray:
    """Norms ``||exp(t M)||_G`` for every ``t`` in ``ts``."""
    A = as_complex_matrix(M)
    if metric is not None:
        A = metric.from_euclid_right(metric.to_euclid(A))
    out = []
    omega = None
    for t in ts:
        if t < 0:
            raise ValueError("t must be non-negative")
        if t == 0:
            out.append(1.0)
            continue
        E = expm(t * A)
        if not np.all(np.isfinite(E)):
            omega = _numerical_abscissa(A) if omega is None else omega
            raise ExpmOverflowError(float(t), omega)
        out.append(float(np.linalg.norm(E, 2)))
    return np.array(out)
