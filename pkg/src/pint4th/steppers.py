"""Sequential time stepping: theta-method for linear operators, Newton-based
fully implicit and convex-splitting steps for Cahn-Hilliard.

These trajectories are the targets the parallel-in-time iterations converge to.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

NEWTON_TOL = 1e-12
NEWTON_MAX = 25


class NewtonError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    dt: float

    def __post_init__(self):
        if not (self.t_final > 0 and self.dt > 0):
            raise ValueError("t_final and dt must be positive")
        ratio = self.t_final / self.dt
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-12 * max(n, 1):
            raise ValueError(
                f"T/dt = {ratio!r} is not an integer; pick dt = T/N_t for an integer N_t"
            )

    @property
    def n_t(self) -> int:
        return int(round(self.t_final / self.dt))

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_t + 1)


@dataclass
class Trajectory:
    """States ``u_0 ... u_{N_t}`` stacked row-wise, shape ``(n_t + 1, n_dof)``."""

    states: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        if self.states.shape[0] != self.grid.n_t + 1:
            raise ValueError("trajectory needs n_t + 1 states")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def unknowns(self) -> np.ndarray:
        """States 1..N_t, the all-at-once unknown layout."""
        return self.states[1:]


@dataclass(frozen=True)
class ChProblem:
    """Double-well Cahn-Hilliard data: ``F(u) = (u^2-1)^2/4``, ``f = F'``."""

    eps: float
    u_max: float = 2.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def eps2(self) -> float:
        return self.eps**2

    @staticmethod
    def potential(u):
        return 0.25 * (u**2 - 1.0) ** 2

    @staticmethod
    def f(u):
        return u**3 - u

    @staticmethod
    def fprime(u):
        return 3.0 * u**2 - 1.0

    @property
    def M(self) -> float:
        # max |3u^2 - 1| on [-u_max, u_max]
        return max(3.0 * self.u_max**2 - 1.0, 1.0)


def _as_sparse(mat) -> sp.csr_matrix:
    if hasattr(mat, "sparse"):
        mat = mat.sparse
    return sp.csr_matrix(mat)


def _theta_matrices(A, theta, dt):
    eye = sp.identity(A.shape[0], format="csc")
    return (eye + theta * dt * A).tocsc(), (eye - (1.0 - theta) * dt * A).tocsr()


def theta_step(op, theta: float, dt: float, u_prev) -> np.ndarray:
    """One step of ``(I + theta dt A) u_n = (I - (1-theta) dt A) u_{n-1}``."""
    A = _as_sparse(op)
    lhs, rhs_mat = _theta_matrices(A, theta, dt)
    try:
        lu = spla.splu(lhs)
    except RuntimeError as exc:
        raise np.linalg.LinAlgError(f"I + theta*dt*A is singular: {exc}") from exc
    return lu.solve(rhs_mat @ np.asarray(u_prev, dtype=float))


def _spectral_sequential(op, theta, grid, u0):
    from .spatial import modal_coefficients, modal_synthesis

    z = grid.dt * np.asarray(op.spectrum)
    denom = 1.0 + theta * z
    if np.abs(denom).min() <= np.finfo(float).eps:
        raise np.linalg.LinAlgError("I + theta*dt*A is singular")
    amp = (1.0 - (1.0 - theta) * z) / denom
    coeffs = np.empty((grid.n_t + 1, op.n_dof))
    coeffs[0] = modal_coefficients(op.mesh, u0)
    for n in range(grid.n_t):
        coeffs[n + 1] = amp * coeffs[n]
    states = modal_synthesis(op.mesh, coeffs)
    states[0] = u0
    return Trajectory(states, grid)


def solve_linear_sequential(op, theta: float, grid: TimeGrid, u0, method: str = "auto") -> Trajectory:
    """``n_t`` theta steps from ``u0``.

    ``method="spectral"`` steps in the cosine eigenbasis, which avoids the
    ``eps * ||dt A||`` roundoff of a factorized solve; ``"lu"`` uses a sparse
    LU.  ``"auto"`` picks spectral for assembled operators and LU for raw matrices.
    """
    if method == "auto":
        method = "spectral" if hasattr(op, "spectrum") else "lu"
    if method == "spectral":
        return _spectral_sequential(op, theta, grid, np.asarray(u0, dtype=float))
    if method != "lu":
        raise ValueError(f"unknown method {method!r}")
    A = _as_sparse(op)
    lhs, rhs_mat = _theta_matrices(A, theta, grid.dt)
    try:
        lu = spla.splu(lhs)
    except RuntimeError as exc:
        raise np.linalg.LinAlgError(f"I + theta*dt*A is singular: {exc}") from exc
    states = np.empty((grid.n_t + 1, A.shape[0]))
    states[0] = u0
    for n in range(grid.n_t):
        states[n + 1] = lu.solve(rhs_mat @ states[n])
    return Trajectory(states, grid)


def _newton(residual, jacobian, u, tol, max_iter, history):
    r = residual(u)
    rn = np.linalg.norm(r)
    if history is not None:
        history.append(rn)
    for _ in range(max_iter):
        if rn <= tol:
            return u
        delta = spla.spsolve(jacobian(u).tocsc(), r)
        u = u - delta
        r = residual(u)
        rn = np.linalg.norm(r)
        if history is not None:
            history.append(rn)
        # an update below roundoff means the iterate cannot move any more
        if np.linalg.norm(delta) <= tol * max(1.0, np.linalg.norm(u)):
            return u
    if rn <= tol:
        return u
    raise NewtonError(f"Newton did not converge in {max_iter} iterations", rn)


def ch_implicit_step(lap, prob: ChProblem, dt: float, u_prev, newton_tol: float = NEWTON_TOL,
                     newton_max: int = NEWTON_MAX, history: list | None = None) -> np.ndarray:
    """Backward Euler step ``u - u_prev = dt (L f(u) - eps^2 L^2 u)``.

    Newton with the exact Jacobian ``I - dt (L diag(f'(u)) - eps^2 L^2)``;
    starts from ``u_prev``.  Residual norms are appended to ``history`` if given.
    """
    L = _as_sparse(lap)
    L2 = (L @ L).tocsr()
    eye = sp.identity(L.shape[0], format="csr")
    u_prev = np.asarray(u_prev, dtype=float)
    if dt > prob.eps2:
        warnings.warn(f"dt={dt:g} exceeds eps^2={prob.eps2:g}; the implicit scheme may "
                      "lose energy stability", stacklevel=2)

    def residual(u):
        return u - u_prev - dt * (L @ prob.f(u) - prob.eps2 * (L2 @ u))

    def jacobian(u):
        return eye - dt * (L @ sp.diags(prob.fprime(u)) - prob.eps2 * L2)

    return _newton(residual, jacobian, u_prev.copy(), newton_tol, newton_max, history)


def ch_eyre_step(lap, prob: ChProblem, dt: float, u_prev, newton_tol: float = NEWTON_TOL,
                 newton_max: int = NEWTON_MAX, history: list | None = None) -> np.ndarray:
    """Convex-splitting step ``(u - u_prev)/dt = L u^3 - L u_prev - eps^2 L^2 u``.

    The residual is the step equation multiplied by ``dt`` so that
    ``newton_tol`` is measured in solution units, as for :func:`ch_implicit_step`.
    """
    L = _as_sparse(lap)
    L2 = (L @ L).tocsr()
    eye = sp.identity(L.shape[0], format="csr")
    u_prev = np.asarray(u_prev, dtype=float)
    explicit = u_prev - dt * (L @ u_prev)

    def residual(u):
        return u + dt * prob.eps2 * (L2 @ u) - dt * (L @ u**3) - explicit

    def jacobian(u):
        return eye + dt * prob.eps2 * L2 - dt * (L @ sp.diags(3.0 * u**2))

    return _newton(residual, jacobian, u_prev.copy(), newton_tol, newton_max, history)


def solve_ch_sequential(lap, prob: ChProblem, grid: TimeGrid, u0, scheme: str = "implicit",
                        newton_tol: float = NEWTON_TOL, newton_max: int = NEWTON_MAX) -> Trajectory:
    step = {"implicit": ch_implicit_step, "eyre": ch_eyre_step}[scheme]
    states = np.empty((grid.n_t + 1, np.size(u0)))
    states[0] = u0
    if scheme == "implicit" and grid.dt > prob.eps2:
        warnings.warn(f"dt={grid.dt:g} exceeds eps^2={prob.eps2:g}; the implicit scheme may "
                      "lose energy stability", stacklevel=2)
    with warnings.catch_warnings():
        # warned once above, not once per step
        warnings.simplefilter("ignore")
        for n in range(grid.n_t):
            states[n + 1] = step(lap, prob, grid.dt, states[n], newton_tol, newton_max)
    return Trajectory(states, grid)
