"""Chebyshev collocation machinery.

Gauss-Lobatto grids, differentiation matrices up to order four,
Clenshaw-Curtis quadrature, barycentric interpolation and boundary
bordering (row replacement) with the matching elimination of boundary
unknowns used by every operator assembly in the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import toeplitz

__all__ = [
    "SpectralGrid",
    "BcSpec",
    "BorderedReduction",
    "build_grid",
    "inner_product",
    "weighted_norm",
    "boundary_rows",
    "impose_bc",
    "reduce_bordered",
    "bordered_eigenvalues",
    "interpolate",
]

DEFAULT_N = 128


def _chebdif(npts: int, order: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Differentiation matrices on Gauss-Lobatto points.

    Uses trigonometric identities for node differences, the flipping trick
    and the negative-sum trick on the diagonals (Weideman-Reddy recursion).
    """
    n1 = npts // 2
    n2 = (npts + 1) // 2
    k = np.arange(npts)
    th = k * np.pi / (npts - 1)
    x = np.sin(np.pi * np.arange(npts - 1, -npts, -2) / (2 * (npts - 1)))

    T = np.tile(th / 2, (npts, 1))
    DX = 2 * np.sin(T.T + T) * np.sin(T - T.T)
    DX = np.vstack([DX[:n1, :], -np.flipud(np.fliplr(DX[:n2, :]))])
    np.fill_diagonal(DX, 1.0)

    C = toeplitz((-1.0) ** k)
    C[0, :] *= 2
    C[-1, :] *= 2
    C[:, 0] /= 2
    C[:, -1] /= 2

    Z = 1.0 / DX
    np.fill_diagonal(Z, 0.0)

    D = np.eye(npts)
    mats = []
    for ell in range(1, order + 1):
        D = ell * Z * (C * np.tile(np.diag(D), (npts, 1)).T - D)
        np.fill_diagonal(D, -np.sum(D, axis=1))
        mats.append(D.copy())
    return x, mats


def _clenshaw_curtis(n: int) -> np.ndarray:
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    ii = np.arange(1, n)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2 * np.cos(2 * k * theta[ii]) / (4 * k**2 - 1)
        v -= np.cos(n * theta[ii]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2 * np.cos(2 * k * theta[ii]) / (4 * k**2 - 1)
    w[ii] = 2 * v / n
    return w


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Chebyshev-Gauss-Lobatto grid on [-1, 1] with ``n + 1`` nodes.

    ``nodes[j] = cos(j*pi/n)`` so the first node is ``+1`` and the last ``-1``.
    ``diff[k-1]`` is the order-k differentiation matrix (k = 1..4).
    """

    n: int
    nodes: np.ndarray
    diff: tuple
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.n + 1

    def d(self, order: int) -> np.ndarray:
        return self.diff[order - 1]

    @property
    def bary_weights(self) -> np.ndarray:
        w = (-1.0) ** np.arange(self.n + 1)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


@lru_cache(maxsize=32)
def _cached_grid(n: int) -> SpectralGrid:
    x, mats = _chebdif(n + 1, 4)
    for m in mats:
        m.setflags(write=False)
    x.setflags(write=False)
    w = _clenshaw_curtis(n)
    w.setflags(write=False)
    return SpectralGrid(n=n, nodes=x, diff=tuple(mats), weights=w)


def build_grid(n: int = DEFAULT_N) -> SpectralGrid:
    """Return the Chebyshev grid with ``n + 1`` nodes (cached, read-only).

    Raises ``ValueError`` for ``n < 8`` or odd ``n``: odd sizes lose the
    positivity guarantees used by the quadrature-weighted norms.
    """
    if int(n) != n or n < 8 or n % 2:
        raise ValueError(f"grid size must be an even integer >= 8, got {n!r}")
    return _cached_grid(int(n))


def inner_product(grid: SpectralGrid, f, g) -> complex:
    """Discrete L2(-1,1) pairing ``sum_j w_j conj(f_j) g_j``."""
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != (grid.size,) or g.shape != (grid.size,):
        raise ValueError(
            f"vectors must have length {grid.size}, got {f.shape} and {g.shape}"
        )
    return complex(np.sum(grid.weights * np.conj(f) * g))


def weighted_norm(grid: SpectralGrid, f) -> float:
    return float(np.sqrt(abs(inner_product(grid, f, f))))


def interpolate(grid: SpectralGrid, values, x) -> np.ndarray:
    """Barycentric interpolation of nodal ``values`` to points ``x``."""
    values = np.asarray(values)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xn = grid.nodes
    bw = grid.bary_weights
    diff = x[:, None] - xn[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15, rtol=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = bw[None, :] / diff
        out = (c @ values) / c.sum(axis=1)
    hit = exact.any(axis=1)
    if hit.any():
        out[hit] = values[np.argmax(exact[hit], axis=1)]
    return out


@dataclass(frozen=True, eq=False)
class BcSpec:
    """Boundary-condition specification.

    kinds:
      ``dirichlet``   u(+-1) = 0
      ``dirichlet2``  u(+-1) = 0, u''(+-1) = 0   (traction walls)
      ``dirichlet4``  u(+-1) = 0, u'(+-1) = 0    (no-slip walls)
      ``neumann``     u'(+-1) = 0
      ``constrained`` two functionals <g_k, u> = 0 on rows 0 and n
      ``mixed``       explicit ``(row, functional)`` pairs in ``rows``; a
                      functional given as a sampled function g is applied as
                      the quadrature pairing <g, u> when ``weighted`` is true,
                      or as a raw row otherwise.
    """

    kind: str
    functionals: tuple = ()
    rows: tuple = ()
    weighted: bool = True

    def __post_init__(self):
        allowed = {"dirichlet", "dirichlet2", "dirichlet4", "neumann", "constrained", "mixed"}
        if self.kind not in allowed:
            raise ValueError(f"unknown bc kind {self.kind!r}")
        if self.kind == "constrained" and len(self.functionals) != 2:
            raise ValueError("constrained bc needs exactly two functionals")

    @staticmethod
    def constrained(g_plus, g_minus) -> "BcSpec":
        return BcSpec("constrained", functionals=(np.asarray(g_plus), np.asarray(g_minus)))

    @staticmethod
    def mixed(rows: Sequence[int], functionals: Sequence, weighted: bool = False) -> "BcSpec":
        return BcSpec(
            "mixed",
            functionals=tuple(np.asarray(f) for f in functionals),
            rows=tuple(int(r) for r in rows),
            weighted=weighted,
        )


def boundary_rows(bc: BcSpec, grid: SpectralGrid) -> tuple[list[int], np.ndarray]:
    """Row indices replaced by ``bc`` and the replacement rows themselves."""
    n = grid.n
    N = grid.size
    e0 = np.zeros(N)
    e0[0] = 1.0
    en = np.zeros(N)
    en[n] = 1.0
    D1, D2 = grid.d(1), grid.d(2)
    if bc.kind == "dirichlet":
        return [0, n], np.array([e0, en])
    if bc.kind == "neumann":
        return [0, n], np.array([D1[0], D1[n]])
    if bc.kind == "dirichlet2":
        return [0, 1, n - 1, n], np.array([e0, D2[0], D2[n], en])
    if bc.kind == "dirichlet4":
        return [0, 1, n - 1, n], np.array([e0, D1[0], D1[n], en])
    if bc.kind == "constrained":
        C = np.array([grid.weights * np.conj(g) for g in bc.functionals])
        gram = np.array(
            [[inner_product(grid, a, b) for b in bc.functionals] for a in bc.functionals]
        )
        scale = np.prod([abs(gram[i, i]) for i in range(2)])
        if abs(np.linalg.det(gram)) <= 1e-14 * max(scale, 1e-300):
            raise np.linalg.LinAlgError("constraint functionals are linearly dependent")
        return [0, n], C
    if bc.kind == "mixed":
        rows = list(bc.rows)
        if bc.weighted:
            C = np.array([grid.weights * np.conj(g) for g in bc.functionals])
        else:
            C = np.array([np.asarray(g) for g in bc.functionals])
        return rows, C
    raise ValueError(bc.kind)


def impose_bc(matrix, bc: BcSpec, grid: SpectralGrid, rhs=None):
    """Replace the rows nearest the boundary by the rows encoding ``bc``.

    Interior rows are copied untouched. When ``rhs`` is given, its replaced
    entries are zeroed and ``(matrix, rhs)`` is returned.
    """
    A = np.array(matrix, dtype=complex, copy=True)
    if A.shape != (grid.size, grid.size):
        raise ValueError("matrix must be square on the grid")
    rows, C = boundary_rows(bc, grid)
    A[rows, :] = C
    if bc.kind in ("constrained", "mixed"):
        block = C[:, rows]
        if np.linalg.matrix_rank(block, tol=1e-12 * max(1.0, np.abs(block).max())) < len(rows):
            raise np.linalg.LinAlgError("singular constraint block")
    if rhs is None:
        return A
    b = np.array(rhs, dtype=complex, copy=True)
    b[rows] = 0.0
    return A, b


@dataclass(frozen=True, eq=False)
class BorderedReduction:
    """Elimination of the unknowns at bordered rows.

    ``lift`` maps interior unknowns to the full nodal vector satisfying the
    boundary rows exactly; ``interior`` lists the retained indices.
    """

    rows: tuple
    interior: np.ndarray
    lift: np.ndarray

    def reduce(self, A) -> np.ndarray:
        """Restrict ``A`` to interior rows acting on lifted unknowns."""
        return np.asarray(A)[self.interior, :] @ self.lift

    def expand(self, u_int) -> np.ndarray:
        return self.lift @ u_int


def reduce_bordered(bc: BcSpec, grid: SpectralGrid) -> BorderedReduction:
    rows, C = boundary_rows(bc, grid)
    N = grid.size
    interior = np.array([j for j in range(N) if j not in set(rows)])
    CR = C[:, rows]
    CI = C[:, interior]
    cond = np.linalg.cond(CR)
    if not np.isfinite(cond) or cond > 1e13:
        raise np.linalg.LinAlgError("boundary block is singular; cannot eliminate")
    T = -np.linalg.solve(CR, CI)
    P = np.zeros((N, len(interior)), dtype=np.result_type(T, float))
    P[interior, np.arange(len(interior))] = 1.0
    P[rows, :] = T
    return BorderedReduction(rows=tuple(rows), interior=interior, lift=P)


def bordered_eigenvalues(A, bc: BcSpec, grid: SpectralGrid, mass=None, solver=None) -> np.ndarray:
    """Eigenvalues of ``A u = lam * mass u`` on the domain encoded by ``bc``.

    Boundary unknowns are eliminated, the mass side is inverted by LU, and
    the resulting standard problem is passed to ``solver`` (defaults to the
    package QR eigensolver).
    """
    from .dense_complex import eigenvalues, solve_linear_matrix

    red = reduce_bordered(bc, grid)
    K = red.reduce(A)
    if mass is not None:
        Mr = red.reduce(mass)
        K = solve_linear_matrix(Mr, K)
    solver = solver or eigenvalues
    return np.asarray(solver(K))
