"""Waveform relaxation with a periodic-like initial condition for linear problems.

Each outer iteration solves the all-at-once system
``(C1 (x) I + C2 (x) A) U^k = b^{k-1}`` by the three diagonalization steps:
scaled DFT in time, ``n_t`` independent shifted spatial solves, inverse
transform.  ``solve_direct`` assembles the same system for checking.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels, theory
from .circulant import AlphaCirculant, DiagonalizationData, build_circulants, diagonalize
from .circulant import step1_transform, step3_transform
from .diagnostics import ConvergenceReport, error_linf_l2, error_linf_linf
from .spatial import (OperatorKind, SingularShiftError, SpatialOperator, modal_coefficients,
                      modal_synthesis, sparse_bandwidth, to_band)
from .steppers import TimeGrid, Trajectory

DIRECT_MAX_SIZE = 20000


@dataclass
class SpaceTimeState:
    blocks: np.ndarray
    iteration_index: int = 0
    imag_residue: float = 0.0

    @property
    def n_t(self) -> int:
        return self.blocks.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.blocks[-1]


@dataclass
class RhsVector:
    blocks: np.ndarray


@dataclass
class PintConfig:
    alpha: float
    tol: float = 1e-10
    max_iter: int = 20
    norm_kind: str = "linf_l2"
    seed: int = 0
    workers: int = 1
    transform: str = "fft"
    backend: str | None = None
    step2: str = "spectral"
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.norm_kind not in ("linf_l2", "linf_linf"):
            raise ValueError(f"unknown norm {self.norm_kind!r}")


def random_initial_guess(n_t: int, n_dof: int, seed: int) -> np.ndarray:
    """All blocks i.i.d. uniform on [-1, 1]."""
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n_t, n_dof))


def build_rhs(u0, u_prev_final, alpha: float, dt: float, theta: float, op: SpatialOperator,
              n_t: int) -> RhsVector:
    """First block ``(I/dt - (1-theta) A)(u0 - alpha u_prev_final)``, all others zero."""
    u0 = np.asarray(u0, dtype=float)
    u_prev_final = np.asarray(u_prev_final, dtype=float)
    if u0.shape != (op.n_dof,) or u_prev_final.shape != (op.n_dof,):
        raise ValueError("u0 and u_prev_final must be spatial vectors of length n_dof")
    v = u0 - alpha * u_prev_final
    blocks = np.zeros((n_t, op.n_dof))
    blocks[0] = v / dt - (1.0 - theta) * op.apply(v)
    return RhsVector(blocks)


def _bands(mats):
    kl = ku = 0
    for m in mats:
        lo, hi = sparse_bandwidth(m)
        kl, ku = max(kl, lo), max(ku, hi)
    return np.stack([to_band(m, kl, ku) for m in mats]), kl, ku



def diagonal_solve(circ: DiagonalizationData, mats, coefs, rhs_blocks, workers: int = 1,
                   backend: str | None = None) -> tuple[np.ndarray, float]:
    """Steps (1)-(3) for ``sum_j (D_j (x) B_j)``-type systems.

    ``coefs[n, j]`` multiplies ``mats[j]`` in the n-th shifted system.
    Returns the real solution and the relative size of the discarded imaginary part.
    """
    s1 = step1_transform(rhs_blocks, circ.gamma, circ.method)
    bands, kl, ku = _bands(mats)
    s2 = kernels.solve_shifted_batch(bands, coefs, s1, kl, ku, workers=workers, backend=backend)
    return _real_part(step3_transform(s2, circ.gamma, circ.method))


def _real_part(u):
    scale = np.abs(u.real).max()
    imag = np.abs(u.imag).max()
    return u.real.copy(), float(imag / scale) if scale > 0 else float(imag)


def _modal_denominators(op, circ):
    denom = circ.eigs_c1[:, None] + circ.eigs_c2[:, None] * op.spectrum[None, :]
    small = np.abs(denom) <= 1e3 * np.finfo(float).eps * (
        np.abs(circ.eigs_c1)[:, None] + np.abs(circ.eigs_c2)[:, None] * np.abs(op.spectrum).max())
    if small.any():
        n = int(np.argwhere(small)[0, 0])
        raise SingularShiftError(circ.eigs_c1[n], circ.eigs_c2[n], index=n)
    return denom


def modal_sweep(op: SpatialOperator, circ: DiagonalizationData, rhs_modal) -> tuple[np.ndarray, float]:
    """Steps (1)-(3) with every quantity in cosine-eigenbasis coordinates.

    Step (2) is then a division by ``l1_n + l2_n mu_p``, exact for this
    basis.  Returns real modal blocks and the relative imaginary residue.
    """
    s1 = step1_transform(rhs_modal, circ.gamma, circ.method)
    s2 = s1 / _modal_denominators(op, circ)
    return _real_part(step3_transform(s2, circ.gamma, circ.method))


def pint_sweep(op: SpatialOperator, circ: DiagonalizationData, rhs: RhsVector, workers: int = 1,
               backend: str | None = None, step2: str = "spectral") -> SpaceTimeState:
    """Solve ``(C1 (x) I + C2 (x) A) U = rhs`` by diagonalization.

    ``step2="spectral"`` solves the shifted systems in the cosine eigenbasis;
    ``step2="banded"`` factorizes each ``l1 I + l2 A`` with the banded LU kernel.
    Both are direct.  The spectral route carries roundoff ``O(eps)`` instead of
    ``O(eps ||A|| / |l1|)``, which matters once Step (3) divides by ``alpha``.
    """
    rhs_blocks = np.asarray(rhs.blocks)
    if rhs_blocks.shape != (circ.n_t, op.n_dof):
        raise ValueError(f"rhs shape {rhs_blocks.shape} != ({circ.n_t}, {op.n_dof})")
    if step2 == "banded":
        eye = sp.identity(op.n_dof, format="csr")
        coefs = np.stack([circ.eigs_c1, circ.eigs_c2], axis=1)
        u, imag = diagonal_solve(circ, [eye, op.sparse], coefs, rhs_blocks, workers, backend)
        return SpaceTimeState(u, imag_residue=imag)
    if step2 != "spectral":
        raise ValueError(f"unknown step2 solver {step2!r}")
    # a physical rhs is taken as given; run_pint_linear forms it in modal space instead
    u_modal, imag = modal_sweep(op, circ, modal_coefficients(op.mesh, rhs_blocks))
    return SpaceTimeState(modal_synthesis(op.mesh, u_modal), imag_residue=imag)


def all_at_once_matrix(op: SpatialOperator, ac: AlphaCirculant) -> sp.csc_matrix:
    c1 = sp.csr_matrix(ac.dense(1))
    c2 = sp.csr_matrix(ac.dense(2))
    eye = sp.identity(op.n_dof, format="csr")
    return (sp.kron(c1, eye) + sp.kron(c2, op.sparse)).tocsc()


def solve_direct(op: SpatialOperator, ac: AlphaCirculant, rhs: RhsVector,
                 max_size: int = DIRECT_MAX_SIZE) -> SpaceTimeState:
    """Assemble the all-at-once matrix and factorize it directly (oracle)."""
    size = ac.n_t * op.n_dof
    if size > max_size:
        raise MemoryError(f"all-at-once system of size {size} exceeds cap {max_size}")
    mat = all_at_once_matrix(op, ac)
    b = np.asarray(rhs.blocks, dtype=float).ravel()
    try:
        x = spla.splu(mat).solve(b)
    except RuntimeError as exc:
        raise np.linalg.LinAlgError(f"all-at-once matrix is singular: {exc}") from exc
    return SpaceTimeState(x.reshape(ac.n_t, op.n_dof))


def theoretical_rho_linear(op: SpatialOperator, alpha: float, grid: TimeGrid, theta: float):
    """Fully discrete factor for the operator's kind; None when no estimate applies."""
    if op.kind is OperatorKind.LINEARIZED_CH:
        return theory.rho_linch_fully_discrete(alpha, grid.dt, grid.n_t, op.eps, op.beta, theta)
    if abs(alpha) < 0.5:
        return theory.rho_discrete_simple(alpha)
    return None


def measure(U, reference: Trajectory, mesh, norm_kind: str) -> tuple[float, float]:
    """(configured error norm, eigen-coordinate L-inf/L-inf error)."""
    if norm_kind == "linf_l2":
        err = error_linf_l2(U, reference, mesh.h, mesh.dim)
    else:
        err = error_linf_linf(U, reference)
    diff = np.asarray(U) - reference.unknowns
    modal = float(np.abs(modal_coefficients(mesh, diff)).max())
    return err, modal


def run_pint_linear(op: SpatialOperator, grid: TimeGrid, cfg: PintConfig, u0,
                    reference: Trajectory, theta: float = 1.0,
                    initial_guess=None) -> ConvergenceReport:
    """Outer iterations until the error against ``reference`` drops below ``cfg.tol``.

    Non-convergence is reported through ``converged=False``, not raised.
    """
    start = time.perf_counter()
    ac = build_circulants(grid.n_t, cfg.alpha, grid.dt, theta)
    circ = diagonalize(ac, cfg.transform)
    if initial_guess is None:
        U = random_initial_guess(grid.n_t, op.n_dof, cfg.seed)
    else:
        U = np.array(initial_guess, dtype=float).reshape(grid.n_t, op.n_dof)
    e0, m0 = measure(U, reference, op.mesh, cfg.norm_kind)
    errors, modal, imag_max = [], [], 0.0
    converged = False
    spectral = cfg.step2 == "spectral"
    if spectral:
        u0_modal = modal_coefficients(op.mesh, np.asarray(u0, dtype=float))
        last_modal = modal_coefficients(op.mesh, U[-1])
        scale = 1.0 / grid.dt - (1.0 - theta) * op.spectrum
        rhs_modal = np.zeros((grid.n_t, op.n_dof))
    for k in range(1, cfg.max_iter + 1):
        if spectral:
            # rhs built from O(1) modal data so the stiff factor multiplies exactly
            rhs_modal[0] = scale * (u0_modal - cfg.alpha * last_modal)
            U_modal, imag = modal_sweep(op, circ, rhs_modal)
            last_modal = U_modal[-1]
            U = modal_synthesis(op.mesh, U_modal)
        else:
            rhs = build_rhs(u0, U[-1], cfg.alpha, grid.dt, theta, op, grid.n_t)
            state = pint_sweep(op, circ, rhs, cfg.workers, cfg.backend, "banded")
            U, imag = state.blocks, state.imag_residue
        imag_max = max(imag_max, imag)
        err, merr = measure(U, reference, op.mesh, cfg.norm_kind)
        errors.append(err)
        modal.append(merr)
        if err <= cfg.tol:
            converged = True
            break
    report = ConvergenceReport(
        errors_per_iteration=errors,
        norm_kind=cfg.norm_kind,
        theoretical_rho=theoretical_rho_linear(op, cfg.alpha, grid, theta),
        converged=converged,
        iterations=len(errors),
        imag_residue_max=imag_max,
        wallclock=time.perf_counter() - start,
        tol=cfg.tol,
        initial_error=e0,
        modal_errors=modal,
        initial_modal_error=m0,
    )
    report.solution = U
    return report
