"""Neumann finite-difference operators on equidistant 1D/2D grids.

The second-difference matrix keeps the ghost-point stencil with corner
entries 2 (first and last rows), so it is *not* symmetric; it is symmetric
with respect to the trapezoid-weighted inner product instead.  Every
fourth-order operator built here is a polynomial in that matrix, which makes
the eigenvectors shared and the spectrum available in closed form.
"""

from __future__ import annotations

import enum
import functools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

MAX_DOF = 4096
BETA_SPINODAL = 1.0 / np.sqrt(3.0)


class SingularShiftError(np.linalg.LinAlgError):
    """Raised when ``sigma*I + tau*A`` cannot be factorized."""

    def __init__(self, sigma, tau, index=None):
        self.sigma = sigma
        self.tau = tau
        self.index = index
        where = "" if index is None else f" at time index {index}"
        super().__init__(f"singular shifted system{where}: sigma={sigma!r}, tau={tau!r}")


class OperatorKind(str, enum.Enum):
    BIHARMONIC = "biharmonic"
    LINEARIZED_CH = "linearized_ch"
    GENERAL_FOURTH_ORDER = "general_fourth_order"
    LAPLACIAN_ONLY = "laplacian_only"


@dataclass(frozen=True)
class Mesh1D:
    n_x: int
    h: float

    def __post_init__(self):
        if int(self.n_x) != self.n_x or self.n_x < 3:
            raise ValueError(f"n_x must be an integer >= 3, got {self.n_x!r}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h!r}")

    dim = 1

    @property
    def n_dof(self) -> int:
        return self.n_x

    @property
    def length(self) -> float:
        return self.h * (self.n_x - 1)

    def nodes(self) -> np.ndarray:
        return self.h * np.arange(self.n_x)


@dataclass(frozen=True)
class Mesh2D:
    n_x: int
    h: float

    def __post_init__(self):
        if int(self.n_x) != self.n_x or self.n_x < 3:
            raise ValueError(f"n_x must be an integer >= 3, got {self.n_x!r}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h!r}")

    dim = 2

    @property
    def n_dof(self) -> int:
        return self.n_x * self.n_x

    @property
    def length(self) -> float:
        return self.h * (self.n_x - 1)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` flattened in the same order as the unknowns."""
        x = self.h * np.arange(self.n_x)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return X.ravel(), Y.ravel()


def trapezoid_weights(mesh) -> np.ndarray:
    """Trapezoid weights (1/2, 1, ..., 1, 1/2), tensorized in 2D."""
    w = np.ones(mesh.n_x)
    w[0] = w[-1] = 0.5
    if mesh.dim == 2:
        return np.outer(w, w).ravel()
    return w


def _laplacian_1d_sparse(n_x: int, h: float) -> sp.csr_matrix:
    main = np.full(n_x, -2.0)
    upper = np.ones(n_x - 1)
    lower = np.ones(n_x - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    return (sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / h**2).tocsr()


def assemble_laplacian_1d(mesh: Mesh1D) -> np.ndarray:
    """Dense Neumann second-difference matrix, rows (-2,2), (1,-2,1), (2,-2) over h^2."""
    if mesh.n_x < 3:
        raise ValueError("stencil needs at least 3 points")
    return _laplacian_1d_sparse(mesh.n_x, mesh.h).toarray()


def _laplacian_2d_sparse(mesh: Mesh2D) -> sp.csr_matrix:
    lap = _laplacian_1d_sparse(mesh.n_x, mesh.h)
    eye = sp.identity(mesh.n_x, format="csr")
    return (sp.kron(eye, lap) + sp.kron(lap, eye)).tocsr()


def assemble_laplacian_2d(mesh: Mesh2D, max_dof: int = MAX_DOF) -> np.ndarray:
    """Kronecker sum ``I (x) D + D (x) I`` of the 1D operator with itself."""
    if mesh.n_dof > max_dof:
        raise MemoryError(
            f"2D operator with {mesh.n_dof} unknowns exceeds the dense cap of {max_dof}"
        )
    return _laplacian_2d_sparse(mesh).toarray()


def analytic_spectrum_laplacian_1d(mesh: Mesh1D) -> np.ndarray:
    """Eigenvalues ``2/h^2 (cos((p-1) pi/(N_x-1)) - 1)`` for p = 1..N_x."""
    p = np.arange(mesh.n_x)
    return 2.0 / mesh.h**2 * (np.cos(p * np.pi / (mesh.n_x - 1)) - 1.0)


def laplacian_spectrum(mesh) -> np.ndarray:
    lam = analytic_spectrum_laplacian_1d(Mesh1D(mesh.n_x, mesh.h))
    if mesh.dim == 2:
        return (lam[:, None] + lam[None, :]).ravel()
    return lam


def _polynomial_coefficients(kind: OperatorKind, eps, beta):
    """Return (c1, c2) such that A = c1*D + c2*D^2."""
    if kind is OperatorKind.BIHARMONIC:
        return 0.0, 1.0
    if kind is OperatorKind.LINEARIZED_CH:
        return beta**2, eps**2
    if kind is OperatorKind.GENERAL_FOURTH_ORDER:
        # u_t = -D^2 u + D u written as u' + A u = 0
        return -1.0, 1.0
    if kind is OperatorKind.LAPLACIAN_ONLY:
        return 1.0, 0.0
    raise ValueError(f"unknown operator kind {kind!r}")


@dataclass(frozen=True)
class SpatialOperator:
    """Assembled operator ``A`` for the semi-discrete system ``u' + A u = 0``.

    ``LAPLACIAN_ONLY`` stores the second-difference matrix itself (used by
    the Cahn-Hilliard solvers, which need the Laplacian rather than a
    dissipative ``A``).
    """

    kind: OperatorKind
    mesh: Mesh1D | Mesh2D
    matrix: np.ndarray
    sparse: sp.csr_matrix = field(repr=False)
    spectrum: np.ndarray = field(repr=False)
    eps: float | None = None
    beta: float | None = None

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def n_dof(self) -> int:
        return self.mesh.n_dof

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Apply ``A`` to a vector or to each row of a ``(n_blocks, n_dof)`` array."""
        x = np.asarray(x)
        if x.ndim == 1:
            return self.sparse @ x
        return (self.sparse @ x.T).T

    def bandwidth(self) -> tuple[int, int]:
        return sparse_bandwidth(self.sparse)


def sparse_bandwidth(mat) -> tuple[int, int]:
    coo = sp.coo_matrix(mat)
    if coo.nnz == 0:
        return 0, 0
    off = coo.col.astype(np.int64) - coo.row.astype(np.int64)
    return int(max(0, -off.min())), int(max(0, off.max()))


def to_band(mat, kl: int, ku: int) -> np.ndarray:
    """Row-aligned band storage: ``band[i, d] = M[i, i + d - kl]``."""
    mat = sp.csr_matrix(mat)
    n = mat.shape[0]
    band = np.zeros((n, kl + ku + 1), dtype=mat.dtype)
    for k in range(-kl, ku + 1):
        diag = mat.diagonal(k)
        if k >= 0:
            band[: n - k, k + kl] = diag
        else:
            band[-k:, k + kl] = diag
    return band


def operator_sparse(kind: OperatorKind, mesh, eps=None, beta=None) -> sp.csr_matrix:
    lap = _laplacian_1d_sparse(mesh.n_x, mesh.h) if mesh.dim == 1 else _laplacian_2d_sparse(mesh)
    c1, c2 = _polynomial_coefficients(kind, eps, beta)
    out = sp.csr_matrix(lap.shape)
    if c1:
        out = out + c1 * lap
    if c2:
        out = out + c2 * (lap @ lap)
    out = sp.csr_matrix(out)
    out.eliminate_zeros()
    return out


def assemble_operator(kind, mesh, eps: float | None = None, beta: float | None = None,
                      max_dof: int = MAX_DOF) -> SpatialOperator:
    """Assemble ``A`` and its closed-form spectrum.

    Parameters
    ----------
    kind : OperatorKind or str
        ``biharmonic`` (A = D^2), ``linearized_ch`` (A = beta^2 D + eps^2 D^2),
        ``general_fourth_order`` (A = D^2 - D) or ``laplacian_only`` (D).
    mesh : Mesh1D or Mesh2D
    eps, beta : float, optional
        Interface width and spinodal parameter; only ``linearized_ch`` uses them.
    """
    kind = OperatorKind(kind)
    if kind is OperatorKind.LINEARIZED_CH:
        if eps is None or beta is None:
            raise ValueError("linearized_ch needs both eps and beta")
        if abs(beta) > BETA_SPINODAL:
            warnings.warn(f"beta={beta} lies outside [-1/sqrt(3), 1/sqrt(3)]", stacklevel=2)
    if eps is not None and eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    if mesh.n_dof > max_dof:
        raise MemoryError(f"{mesh.n_dof} unknowns exceeds the dense cap of {max_dof}")

    c1, c2 = _polynomial_coefficients(kind, eps, beta)
    lam = laplacian_spectrum(mesh)
    spectrum = c1 * lam + c2 * lam**2
    sparse = operator_sparse(kind, mesh, eps, beta)
    matrix = sparse.toarray()
    matrix.setflags(write=False)
    spectrum.setflags(write=False)
    return SpatialOperator(kind=kind, mesh=mesh, matrix=matrix, sparse=sparse,
                           spectrum=spectrum, eps=eps, beta=beta)


def shifted_solve(op: SpatialOperator, sigma: complex, tau: complex, rhs) -> np.ndarray:
    """Solve ``(sigma I + tau A) x = rhs`` by dense LU with partial pivoting."""
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (op.n_dof,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({op.n_dof},)")
    mat = tau * op.matrix.astype(complex)
    mat[np.diag_indices_from(mat)] += sigma
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(mat, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * max(pivots.max(), 1e-300) * op.n_dof:
        raise SingularShiftError(sigma, tau)
    return sla.lu_solve((lu, piv), rhs)


@functools.lru_cache(maxsize=32)
def _cosine_modes(n_x: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(n_x)
    P = np.cos(np.outer(i, i) * np.pi / (n_x - 1))
    P_inv = np.linalg.inv(P)
    P.setflags(write=False)
    P_inv.setflags(write=False)
    return P, P_inv


def eigenvector_matrix(mesh) -> np.ndarray:
    """Columns are the cosine eigenvectors shared by every operator on ``mesh``."""
    P, _ = _cosine_modes(mesh.n_x)
    if mesh.dim == 2:
        return np.kron(P, P)
    return P.copy()


def modal_coefficients(mesh, vectors) -> np.ndarray:
    """Coordinates ``P^{-1} v`` in the eigenbasis, row-wise for 2D arrays."""
    _, P_inv = _cosine_modes(mesh.n_x)
    v = np.asarray(vectors)
    rows = v.reshape(-1, mesh.n_dof)
    if mesh.dim == 1:
        out = rows @ P_inv.T
    else:
        n = mesh.n_x
        grid = rows.reshape(-1, n, n)
        out = np.einsum("ia,jb,kab->kij", P_inv, P_inv, grid, optimize=True)
    return out.reshape(v.shape)


def modal_synthesis(mesh, coeffs) -> np.ndarray:
    """Inverse of :func:`modal_coefficients`: ``P c``, row-wise."""
    P, _ = _cosine_modes(mesh.n_x)
    c = np.asarray(coeffs)
    rows = c.reshape(-1, mesh.n_dof)
    if mesh.dim == 1:
        out = rows @ P.T
    else:
        n = mesh.n_x
        out = np.einsum("ia,jb,kab->kij", P, P, rows.reshape(-1, n, n), optimize=True)
    return out.reshape(c.shape)
