"""Parallel-in-time Cahn-Hilliard solvers.

Two all-at-once nonlinear systems share the waveform-relaxation outer loop:

* ``PINT_I``: fully implicit steps, residual ``G``.
* ``PINT_II``: convex-splitting steps, residual ``Q``.

Each outer iteration is solved by quasi-Newton with the time-averaged Jacobian,
which restores the Kronecker structure so every inner linear system goes
through the diagonalization solve.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .circulant import AlphaCirculant, DiagonalizationData, build_circulants, diagonalize
from .diagnostics import ConvergenceReport
from .pint_linear import PintConfig, SpaceTimeState, diagonal_solve, measure, random_initial_guess
from .spatial import SpatialOperator
from .steppers import ChProblem, TimeGrid, Trajectory

INNER_TOL = 1e-12
INNER_MAX = 50
# consecutive residual increases that count as divergence
DIVERGENCE_RUN = 3
# below STALL_FACTOR * inner_tol a non-shrinking iteration is treated as converged
STALL_FACTOR = 1e3


class Variant(str, enum.Enum):
    PINT_I = "pint_i"
    PINT_II = "pint_ii"


class QuasiNewtonDivergence(RuntimeError):
    def __init__(self, history, iterate=None):
        super().__init__(f"quasi-Newton residual grew {DIVERGENCE_RUN} times in a row: "
                         + ", ".join(f"{r:.3e}" for r in history[-DIVERGENCE_RUN - 1:]))
        self.history = list(history)
        self.iterate = iterate


@dataclass
class NonlinearAllAtOnce:
    variant: Variant
    lap: sp.csr_matrix
    eps: float
    ac: AlphaCirculant
    circ: DiagonalizationData

    @property
    def n_t(self) -> int:
        return self.ac.n_t

    @property
    def n_dof(self) -> int:
        return self.lap.shape[0]

    @property
    def lap2(self) -> sp.csr_matrix:
        if not hasattr(self, "_lap2"):
            self._lap2 = (self.lap @ self.lap).tocsr()
        return self._lap2


def build_system(variant, lap, eps: float, n_t: int, alpha: float, dt: float,
                 transform: str = "fft") -> NonlinearAllAtOnce:
    """``lap`` is the Neumann Laplacian (a SpatialOperator or a matrix)."""
    variant = Variant(variant)
    mat = lap.sparse if isinstance(lap, SpatialOperator) else sp.csr_matrix(lap)
    # theta only enters C2, which neither variant uses
    ac = build_circulants(n_t, alpha, dt, 1.0)
    return NonlinearAllAtOnce(variant, mat.tocsr(), float(eps), ac, diagonalize(ac, transform))


@dataclass
class QuasiNewtonState:
    m: int
    iterate: SpaceTimeState
    avg_jacobian_diag: np.ndarray
    residual_norm: float
    residual_history: list = field(default_factory=list)
    converged: bool = True


def nonlinear_term(U) -> np.ndarray:
    return np.asarray(U, dtype=float) ** 3


def _circulant_apply(first_col, alpha, U):
    """``(C (x) I) U`` for an alpha-circulant ``C`` with given first column (length <= 2 support)."""
    out = first_col[0] * U
    if first_col[1] != 0.0:
        shifted = np.roll(U, 1, axis=0)
        shifted[0] *= alpha
        out = out + first_col[1] * shifted
    return out


def build_b(sys: NonlinearAllAtOnce, u0, u_prev_final) -> np.ndarray:
    """Right-hand side of the outer iteration: ``b`` for PINT_I, ``b0`` for PINT_II."""
    v = np.asarray(u0, dtype=float) - sys.ac.alpha * np.asarray(u_prev_final, dtype=float)
    if v.shape != (sys.n_dof,):
        raise ValueError("u0 and u_prev_final must have length n_dof")
    b = np.zeros((sys.n_t, sys.n_dof))
    b[0] = v / sys.ac.dt
    if sys.variant is Variant.PINT_II:
        b[0] -= sys.lap @ v
    return b


def _check(sys, U):
    U = np.asarray(U, dtype=float)
    if U.shape != (sys.n_t, sys.n_dof):
        raise ValueError(f"block vector shape {U.shape} != ({sys.n_t}, {sys.n_dof})")
    return U


def _lap_rows(mat, U):
    # apply a spatial matrix to every time block
    return (mat @ U.T).T


def residual(sys: NonlinearAllAtOnce, U, b) -> np.ndarray:
    """``G(U)`` for PINT_I or ``Q(U)`` for PINT_II."""
    U = _check(sys, U)
    b = _check(sys, b)
    ac = sys.ac
    r = _circulant_apply(ac.first_col_c1, ac.alpha, U)
    r -= _lap_rows(sys.lap, nonlinear_term(U))
    if sys.variant is Variant.PINT_I:
        r += _lap_rows(sys.lap, U)
    else:
        r += _lap_rows(sys.lap, _circulant_apply(ac.first_col_c3, ac.alpha, U))
    r += sys.eps**2 * _lap_rows(sys.lap2, U)
    return r - b


def residual_G(sys: NonlinearAllAtOnce, U, rhs_b) -> np.ndarray:
    if sys.variant is not Variant.PINT_I:
        raise ValueError("residual_G needs a PINT_I system")
    return residual(sys, U, rhs_b)


def residual_Q(sys: NonlinearAllAtOnce, U, rhs_b0) -> np.ndarray:
    if sys.variant is not Variant.PINT_II:
        raise ValueError("residual_Q needs a PINT_II system")
    return residual(sys, U, rhs_b0)


def averaged_jacobian(U, form: str = "printed") -> np.ndarray:
    """Time average of the diagonal nonlinear Jacobian.

    ``form="printed"`` averages ``(3u)^2 = 9u^2``; ``form="analytic"`` averages
    ``3u^2``, the true derivative of ``u^3``.  The fixed point does not depend
    on the choice, only the inner convergence rate does.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if form == "printed":
        return np.mean((3.0 * U) ** 2, axis=0)
    if form == "analytic":
        return np.mean(3.0 * U**2, axis=0)
    raise ValueError(f"unknown Jacobian form {form!r}")


def _step2_operators(sys, jdiag):
    """Real spatial matrices and per-frequency coefficients of the Step-(2) systems."""
    eye = sp.identity(sys.n_dof, format="csr")
    nonlin = -(sys.lap @ sp.diags(jdiag)) + sys.eps**2 * sys.lap2
    ones = np.ones(sys.n_t)
    if sys.variant is Variant.PINT_I:
        mats = [eye, (nonlin + sys.lap).tocsr()]
        coefs = np.stack([sys.circ.eigs_c1, ones], axis=1)
    else:
        mats = [eye, nonlin.tocsr(), sys.lap]
        coefs = np.stack([sys.circ.eigs_c1, ones, sys.circ.eigs_c3], axis=1)
    return mats, coefs.astype(complex)


def _residual_floor(sys, U) -> float:
    """Roundoff level of ``dt * ||G(U)||_inf``; rises below it are noise, not divergence."""
    lap_norm = abs(sys.lap).sum(axis=1).max()
    umax = max(1.0, float(np.abs(U).max()))
    row = 2.0 / sys.ac.dt + lap_norm * (3.0 * umax**2 + 1.0) + sys.eps**2 * lap_norm**2
    return 1e2 * np.finfo(float).eps * sys.ac.dt * row * umax


def quasi_newton_solve(sys: NonlinearAllAtOnce, rhs_b, U_init, inner_tol: float = INNER_TOL,
                       inner_max: int = INNER_MAX, jacobian: str = "printed", workers: int = 1,
                       backend: str | None = None, form: str = "correction") -> QuasiNewtonState:
    """Quasi-Newton ``U_m = U_{m-1} - G~'(U_{m-1})^{-1} G(U_{m-1})`` with the averaged Jacobian.

    ``form="rearranged"`` solves ``G~' U_m = L f~(U_{m-1}) - (L J~) U_{m-1} + b``
    for ``U_m`` directly.  ``form="correction"`` solves ``G~' d = G(U_{m-1})``
    and subtracts; the two are algebraically equal, but the correction form's
    Step-(2) roundoff scales with the residual instead of with ``U``, which
    removes the ``1/alpha`` roundoff floor for very small ``alpha``.

    The reported residual is ``dt * ||G(U)||_inf`` (solution units).  Iteration
    stops when it drops below ``inner_tol`` or when the relative update does,
    and also at the roundoff floor: once the residual or the update is below
    ``STALL_FACTOR * inner_tol`` and has stopped shrinking.  Three consecutive
    residual increases above the roundoff level raise :class:`QuasiNewtonDivergence`.
    """
    if not inner_tol > 0:
        raise ValueError("inner_tol must be positive")
    if form not in ("rearranged", "correction"):
        raise ValueError(f"unknown quasi-Newton form {form!r}")
    b = _check(sys, rhs_b)
    U = _check(sys, U_init).copy()
    dt = sys.ac.dt
    G = residual(sys, U, b)
    rn = dt * float(np.abs(G).max())
    history = [rn]
    jdiag = averaged_jacobian(U, jacobian)
    if rn <= inner_tol:
        return QuasiNewtonState(0, SpaceTimeState(U), jdiag, rn, history)
    rises, prev_step = 0, np.inf
    for m in range(1, inner_max + 1):
        jdiag = averaged_jacobian(U, jacobian)
        mats, coefs = _step2_operators(sys, jdiag)
        if form == "correction":
            delta, imag = diagonal_solve(sys.circ, mats, coefs, G, workers, backend)
            U_new = U - delta
        else:
            rhs = _lap_rows(sys.lap, nonlinear_term(U)) - _lap_rows(sys.lap, jdiag * U) + b
            U_new, imag = diagonal_solve(sys.circ, mats, coefs, rhs, workers, backend)
        step = float(np.abs(U_new - U).max())
        U = U_new
        G = residual(sys, U, b)
        rn_new = dt * float(np.abs(G).max())
        history.append(rn_new)
        rises = rises + 1 if rn_new > max(rn, _residual_floor(sys, U)) else 0
        rn = rn_new
        if rises >= DIVERGENCE_RUN or not np.isfinite(rn):
            raise QuasiNewtonDivergence(history, U)
        scale = max(1.0, float(np.abs(U).max()))
        # roundoff floor: tiny, and no longer halving over three iterations
        stalled = (m >= 3 and rn <= STALL_FACTOR * inner_tol and rn >= 0.5 * history[-4])
        if rn <= inner_tol or step <= inner_tol * scale or stalled or (
                step <= STALL_FACTOR * inner_tol * scale and step >= prev_step):
            return QuasiNewtonState(m, SpaceTimeState(U, m, imag), jdiag, rn, history)
        prev_step = step
    return QuasiNewtonState(inner_max, SpaceTimeState(U, inner_max), jdiag, rn, history,
                            converged=False)


def run_pint_ch(variant, problem: ChProblem, lap, grid: TimeGrid, cfg: PintConfig, u0,
                reference: Trajectory, initial_guess=None, inner_tol: float = INNER_TOL,
                inner_max: int = INNER_MAX, jacobian: str = "printed",
                form: str = "correction") -> ConvergenceReport:
    """Outer waveform relaxation for CH; ``reference`` must come from the matching sequential scheme
    (implicit for PINT_I, convex splitting for PINT_II).

    Inner failures end the run with ``converged=False`` and a note in the report.
    """
    start = time.perf_counter()
    sys = build_system(variant, lap, problem.eps, grid.n_t, cfg.alpha, grid.dt, cfg.transform)
    mesh = lap.mesh
    if initial_guess is None:
        U = random_initial_guess(grid.n_t, sys.n_dof, cfg.seed)
    else:
        U = np.array(initial_guess, dtype=float).reshape(grid.n_t, sys.n_dof)
    e0, m0 = measure(U, reference, mesh, cfg.norm_kind)
    errors, modal, inner, notes = [], [], [], []
    imag_max, converged = 0.0, False
    for k in range(1, cfg.max_iter + 1):
        b = build_b(sys, u0, U[-1])
        try:
            qn = quasi_newton_solve(sys, b, U, inner_tol, inner_max, jacobian, cfg.workers,
                                    cfg.backend, form)
        except (QuasiNewtonDivergence, np.linalg.LinAlgError) as exc:
            notes.append(f"outer iteration {k}: {exc}")
            # record where the failed iteration left off so the history is never empty
            last = getattr(exc, "iterate", None)
            if last is not None and np.all(np.isfinite(last)):
                U = last
            err, merr = measure(U, reference, mesh, cfg.norm_kind)
            errors.append(err)
            modal.append(merr)
            inner.append(max(len(getattr(exc, "history", [])) - 1, 0))
            break
        if not qn.converged:
            notes.append(f"outer iteration {k}: inner cap {inner_max} reached, "
                         f"residual {qn.residual_norm:.3e}")
        U = qn.iterate.blocks
        imag_max = max(imag_max, qn.iterate.imag_residue)
        inner.append(qn.m)
        err, merr = measure(U, reference, mesh, cfg.norm_kind)
        errors.append(err)
        modal.append(merr)
        if not np.isfinite(err):
            notes.append(f"outer iteration {k}: non-finite error")
            break
        if err <= cfg.tol:
            converged = True
            break
    report = ConvergenceReport(
        errors_per_iteration=errors,
        norm_kind=cfg.norm_kind,
        theoretical_rho=None,
        converged=converged,
        iterations=len(errors),
        imag_residue_max=imag_max,
        wallclock=time.perf_counter() - start,
        tol=cfg.tol,
        initial_error=e0,
        modal_errors=modal,
        initial_modal_error=m0,
        inner_iterations=inner,
        notes=notes,
    )
    report.solution = U
    return report
