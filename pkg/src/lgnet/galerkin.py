"""Legendre-Galerkin discretization of -u'' + nu u = f on [-1, 1] (and its 2D tensor version).

Basis functions are compact combinations phi_k = L_k + a_k L_{k+1} + b_k L_{k+2},
k = 1..N-1, chosen so each phi_k satisfies a homogeneous Dirichlet or Neumann
condition exactly. With these bases the stiffness matrix is diagonal and the
mass matrix is penta-diagonal, so both are assembled from closed forms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    CGNonConvergence,
    DimensionMismatch,
    InsufficientQuadrature,
    InvalidN,
    NotPositiveDefinite,
)
from .legendre import QuadratureRule, legendre_table

__all__ = [
    "BoundaryCondition",
    "BasisSpec",
    "GalerkinSystem",
    "GalerkinSystem2D",
    "make_basis",
    "basis_eval",
    "basis_deriv",
    "basis_table",
    "assemble",
    "assemble_quadrature",
    "load_matrix",
    "load_vector",
    "solve_exact",
    "reconstruct",
    "reconstruct_deriv",
    "spectrum_bounds",
    "assemble_2d",
    "assemble_2d_quadrature",
    "load_vector_2d",
    "solve_exact_2d",
    "reconstruct_2d",
    "default_quadrature_order",
]


class BoundaryCondition(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True, eq=False)
class BasisSpec:
    N: int
    bc: BoundaryCondition
    a: np.ndarray
    b: np.ndarray

    @property
    def size(self) -> int:
        """Number of basis functions, N - 1."""
        return self.N - 1

    @property
    def degree(self) -> int:
        """Highest polynomial degree in the span."""
        return self.N + 1


def default_quadrature_order(N: int) -> int:
    return 2 * (N + 2)


def make_basis(N: int, bc: BoundaryCondition | str) -> BasisSpec:
    if N < 2:
        raise InvalidN(f"N must be >= 2, got {N}")
    bc = BoundaryCondition(bc)
    k = np.arange(1, N, dtype=float)
    a = np.zeros(N - 1)
    if bc is BoundaryCondition.DIRICHLET:
        b = -np.ones(N - 1)
    else:
        b = -k * (k + 1) / ((k + 2) * (k + 3))
    a.flags.writeable = False
    b.flags.writeable = False
    return BasisSpec(N=N, bc=bc, a=a, b=b)


def _check_index(spec: BasisSpec, k: int) -> None:
    if not 1 <= k <= spec.size:
        raise IndexError(f"basis index {k} outside 1..{spec.size}")


def basis_eval(spec: BasisSpec, k: int, x):
    _check_index(spec, k)
    L, _ = legendre_table(k + 2, x)
    return L[k] + spec.a[k - 1] * L[k + 1] + spec.b[k - 1] * L[k + 2]


def basis_deriv(spec: BasisSpec, k: int, x):
    _check_index(spec, k)
    _, dL = legendre_table(k + 2, x)
    return dL[k] + spec.a[k - 1] * dL[k + 1] + spec.b[k - 1] * dL[k + 2]


def basis_table(spec: BasisSpec, x) -> tuple[np.ndarray, np.ndarray]:
    """phi_k(x) and phi'_k(x) for all k, each of shape ``(N-1,) + x.shape``."""
    L, dL = legendre_table(spec.N + 1, x)
    n = spec.size
    expand = (slice(None),) + (None,) * (L.ndim - 1)
    a, b = spec.a[expand], spec.b[expand]
    phi = L[1 : n + 1] + a * L[2 : n + 2] + b * L[3 : n + 3]
    dphi = dL[1 : n + 1] + a * dL[2 : n + 2] + b * dL[3 : n + 3]
    return phi, dphi


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """Assembled 1D system A = S + nu M.

    ``A_bands`` holds the diagonal and the first two superdiagonals of A
    (entries further out are zero for the analytic assembly) and
    ``chol`` is the matching upper banded Cholesky factor.
    """

    spec: BasisSpec
    nu: float
    S: np.ndarray
    M: np.ndarray
    A: np.ndarray
    A_bands: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)
    chol: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.spec.size

    def M_bands(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.diagonal(self.M, offset=o).copy() for o in range(3))

    def matvec(self, alpha: np.ndarray) -> np.ndarray:
        """A @ alpha using the penta-diagonal bands; alpha may be (n,) or (m, n)."""
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape[-1] != self.size:
            raise DimensionMismatch(f"expected last axis {self.size}, got {alpha.shape}")
        d0, d1, d2 = self.A_bands
        out = d0 * alpha
        out[..., :-1] += d1 * alpha[..., 1:]
        out[..., 1:] += d1 * alpha[..., :-1]
        out[..., :-2] += d2 * alpha[..., 2:]
        out[..., 2:] += d2 * alpha[..., :-2]
        return out


def _finish(spec: BasisSpec, nu: float, S: np.ndarray, M: np.ndarray) -> GalerkinSystem:
    A = S + nu * M
    bands = tuple(np.diagonal(A, offset=o).copy() for o in range(3))
    n = spec.size
    # upper banded storage: row 2 is the diagonal, rows 1 and 0 the superdiagonals
    ab = np.zeros((3, n))
    ab[2] = bands[0]
    ab[1, 1:] = bands[1]
    ab[0, 2:] = bands[2]
    try:
        chol = scipy.linalg.cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"A is not SPD for bc={spec.bc.value}, nu={nu}") from exc
    for arr in (S, M, A):
        arr.flags.writeable = False
    return GalerkinSystem(spec=spec, nu=float(nu), S=S, M=M, A=A, A_bands=bands, chol=chol)


def assemble(spec: BasisSpec, nu: float) -> GalerkinSystem:
    """Closed-form stiffness and mass matrices, then A = S + nu M."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    n = spec.size
    k = np.arange(1, n + 1, dtype=float)
    a, b = spec.a, spec.b
    S = np.diag(-(4 * k + 6) * b)
    M = np.diag(2 / (2 * k + 1) + 2 * a**2 / (2 * k + 3) + 2 * b**2 / (2 * k + 5))
    if n > 1:
        kk = k[:-1]
        off1 = 2 * a[:-1] / (2 * kk + 3) + 2 * a[1:] * b[:-1] / (2 * kk + 5)
        M += np.diag(off1, 1) + np.diag(off1, -1)
    if n > 2:
        kk = k[:-2]
        off2 = 2 * b[:-2] / (2 * kk + 5)
        M += np.diag(off2, 2) + np.diag(off2, -2)
    return _finish(spec, nu, S, M)


def assemble_quadrature(spec: BasisSpec, nu: float, rule: QuadratureRule) -> GalerkinSystem:
    """Same matrices by GLL quadrature of the integrands. Cross-check only."""
    if rule.exactness < 2 * spec.degree:
        raise InsufficientQuadrature(
            f"Q={rule.order} integrates degree {rule.exactness} < {2 * spec.degree}; need Q >= {spec.N + 3}"
        )
    phi, dphi = basis_table(spec, rule.nodes)
    S = (dphi * rule.weights) @ dphi.T
    M = (phi * rule.weights) @ phi.T
    return _finish(spec, nu, S, M)


def load_matrix(spec: BasisSpec, rule: QuadratureRule) -> np.ndarray:
    """B with B[j, q] = w_q phi_j(x_q), so that F = B @ f(nodes)."""
    phi, _ = basis_table(spec, rule.nodes)
    return phi * rule.weights


def load_vector(spec: BasisSpec, f, rule: QuadratureRule) -> np.ndarray:
    """F_j = sum_q w_q f(x_q) phi_j(x_q).

    ``f`` is a callable on the node array or an array of values at the nodes
    (shape ``(Q,)`` or ``(m, Q)`` for a batch).
    """
    vals = np.asarray(f(rule.nodes) if callable(f) else f, dtype=float)
    if vals.ndim == 0:
        vals = np.full(rule.order, float(vals))
    if vals.shape[-1] != rule.order:
        raise DimensionMismatch(f"forcing values have {vals.shape[-1]} nodes, rule has {rule.order}")
    return vals @ load_matrix(spec, rule).T


def solve_exact(sys: GalerkinSystem, F: np.ndarray) -> np.ndarray:
    """alpha = A^{-1} F with the cached banded Cholesky factor. F may be (n,) or (m, n)."""
    F = np.asarray(F, dtype=float)
    if F.shape[-1] != sys.size:
        raise DimensionMismatch(f"load vector has length {F.shape[-1]}, expected {sys.size}")
    sol = scipy.linalg.cho_solve_banded((sys.chol, False), F.T)
    return sol.T


def reconstruct(spec: BasisSpec, alpha: np.ndarray, xs) -> np.ndarray:
    phi, _ = basis_table(spec, xs)
    return np.tensordot(np.asarray(alpha, dtype=float), phi, axes=(-1, 0))


def reconstruct_deriv(spec: BasisSpec, alpha: np.ndarray, xs) -> np.ndarray:
    _, dphi = basis_table(spec, xs)
    return np.tensordot(np.asarray(alpha, dtype=float), dphi, axes=(-1, 0))


def spectrum_bounds(sys: GalerkinSystem) -> tuple[float, float]:
    """(min |lambda|, max |lambda|) over the eigenvalues of A."""
    lam = np.abs(np.linalg.eigvalsh(sys.A))
    return float(lam.min()), float(lam.max())


# --------------------------------------------------------------------------
# 2D: -Lap u + nu u = f on [-1,1]^2, homogeneous Dirichlet
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GalerkinSystem2D:
    """A2 = S (x) M + M (x) S + nu M (x) M, kept in factored form.

    Unknowns are ordered row-major: the coefficient of phi_i(x) phi_j(y)
    sits at flat index i * (N-1) + j (zero-based).
    """

    spec: BasisSpec
    nu: float
    S: np.ndarray
    M: np.ndarray

    @property
    def size(self) -> int:
        return self.spec.size**2

    def matvec(self, alpha: np.ndarray) -> np.ndarray:
        n = self.spec.size
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape[-1] != n * n:
            raise DimensionMismatch(f"expected last axis {n * n}, got {alpha.shape}")
        X = alpha.reshape(alpha.shape[:-1] + (n, n))
        S, M = self.S, self.M
        # row-major vec: (P (x) Q) vec(X) = vec(P X Q^T)
        MX = M @ X
        Y = S @ X @ M.T + MX @ S.T + self.nu * MX @ M.T
        return Y.reshape(alpha.shape)

    def dense(self) -> np.ndarray:
        S, M = self.S, self.M
        return np.kron(S, M) + np.kron(M, S) + self.nu * np.kron(M, M)

    def mass_dense(self) -> np.ndarray:
        """Gram matrix of the 2D basis in L2."""
        return np.kron(self.M, self.M)

    def stiff_dense(self) -> np.ndarray:
        """Gram matrix of the 2D basis gradients."""
        return np.kron(self.S, self.M) + np.kron(self.M, self.S)


def assemble_2d(spec: BasisSpec, nu: float) -> GalerkinSystem2D:
    if spec.bc is not BoundaryCondition.DIRICHLET:
        raise ValueError("2D assembly supports the Dirichlet basis only")
    one = assemble(spec, nu)
    # Kronecker products of SPD factors are SPD; checking M covers the nu-term.
    try:
        np.linalg.cholesky(one.M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("1D mass matrix is not SPD") from exc
    return GalerkinSystem2D(spec=spec, nu=float(nu), S=np.array(one.S), M=np.array(one.M))


def assemble_2d_quadrature(spec: BasisSpec, nu: float, rule: QuadratureRule) -> np.ndarray:
    """Dense 2D matrix by direct tensor quadrature over every (i, j) pair.

    Brute force on purpose: it never uses the Kronecker factorization, so it
    can serve as an oracle for ``GalerkinSystem2D``. Only for small N.
    """
    if rule.exactness < 2 * spec.degree:
        raise InsufficientQuadrature(f"Q={rule.order} too small for N={spec.N}")
    phi, dphi = basis_table(spec, rule.nodes)
    n = spec.size
    W = np.outer(rule.weights, rule.weights)
    vals, gx, gy = [], [], []
    for i in range(n):
        for j in range(n):
            vals.append(np.outer(phi[i], phi[j]))
            gx.append(np.outer(dphi[i], phi[j]))
            gy.append(np.outer(phi[i], dphi[j]))
    A = np.empty((n * n, n * n))
    for p in range(n * n):
        for q in range(n * n):
            integrand = gx[p] * gx[q] + gy[p] * gy[q] + nu * vals[p] * vals[q]
            A[p, q] = np.sum(W * integrand)
    return A


def load_vector_2d(spec: BasisSpec, f, rule: QuadratureRule) -> np.ndarray:
    """F_k = int f phi_i(x) phi_j(y), flattened row-major.

    ``f`` is a callable f(X, Y) on meshgrid arrays or a (Q, Q) array of values
    with first axis x.
    """
    if callable(f):
        X, Y = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
        vals = np.asarray(f(X, Y), dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
    B = load_matrix(spec, rule)
    return (B @ vals @ B.T).reshape(-1)


def solve_exact_2d(
    sys2: GalerkinSystem2D,
    F2: np.ndarray,
    rtol: float = 1e-10,
    maxiter: int | None = None,
) -> np.ndarray:
    """Conjugate gradients on A2 alpha = F2 with Kronecker matvecs."""
    b = np.asarray(F2, dtype=float)
    if b.shape != (sys2.size,):
        raise DimensionMismatch(f"expected load vector of length {sys2.size}")
    if maxiter is None:
        maxiter = 10 * sys2.size
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for _ in range(maxiter):
        Ap = sys2.matvec(p)
        step = rr / (p @ Ap)
        x += step * p
        r -= step * Ap
        rr_new = r @ r
        if np.sqrt(rr_new) <= rtol * bnorm:
            # confirm against the true residual, not the recursively updated one
            if np.linalg.norm(b - sys2.matvec(x)) <= rtol * bnorm:
                return x
            r = b - sys2.matvec(x)
            rr_new = r @ r
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise CGNonConvergence(f"CG did not reach rtol={rtol} in {maxiter} iterations")


def reconstruct_2d(spec: BasisSpec, alpha2: np.ndarray, xs, ys) -> np.ndarray:
    """u(x, y) on the tensor grid xs x ys; result has shape (len(xs), len(ys))."""
    n = spec.size
    C = np.asarray(alpha2, dtype=float).reshape(n, n)
    px, _ = basis_table(spec, np.asarray(xs, dtype=float))
    py, _ = basis_table(spec, np.asarray(ys, dtype=float))
    return px.T @ C @ py
