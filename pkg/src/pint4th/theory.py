"""Closed-form convergence factors for the periodic-like waveform relaxation.

Every factor has the shape ``q/(1-q)`` for some amplification ``q``.  When
``q >= 1`` the bound says nothing; those cases return ``math.inf`` (and set
``vacuous`` on the structured results) instead of raising.
"""

from __future__ import annotations

import math
from typing import NamedTuple


class RhoResult(NamedTuple):
    value: float
    regime: str
    prefactor: float
    vacuous: bool


class ChConstants(NamedTuple):
    c_star: float
    gamma: float | None
    L: float
    C1: float
    L_valid: bool


def _ratio(q: float) -> float:
    return q / (1.0 - q) if q < 1.0 else math.inf


def rho_biharmonic_continuous(alpha: float, T: float, omega_min: float,
                              xi_min: float | None = None) -> float:
    """``|a| e^{-w^4 T} / (1 - |a| e^{-w^4 T})``; 2D adds ``xi_min^4`` to the exponent."""
    rate = omega_min**4 + (xi_min**4 if xi_min is not None else 0.0)
    return _ratio(abs(alpha) * math.exp(-rate * T))


def rho_general_fourth_continuous(alpha: float, T: float, omega_min: float,
                                  xi_min: float | None = None) -> float:
    """Factor for ``u_t = -D^2 u + D u``: exponent ``(w^2 + w^4) T`` (plus xi terms in 2D)."""
    rate = omega_min**2 + omega_min**4
    if xi_min is not None:
        rate += xi_min**2 + xi_min**4
    return _ratio(abs(alpha) * math.exp(-rate * T))


def rho_discrete_simple(alpha: float) -> float:
    if not abs(alpha) < 0.5:
        raise ValueError(f"the simple factor needs |alpha| < 1/2, got {alpha}")
    return abs(alpha) / (1.0 - abs(alpha))


def _check_half(alpha):
    if not abs(alpha) < 0.5:
        raise ValueError(f"the linearized CH estimates need |alpha| < 1/2, got {alpha}")


def _amplified(alpha: float, growth: float) -> RhoResult:
    # growth = exponent of the worst-mode amplification, > 0 means amplifying
    if growth > 0.0:
        pref = math.exp(growth)
        q = abs(alpha) * pref
        return RhoResult(_ratio(q), "amplifying", pref, q >= 1.0)
    return RhoResult(abs(alpha) / (1.0 - abs(alpha)), "decaying", 1.0, False)


def g_tilde(z: float, T: float, eps: float, beta: float) -> float:
    return -(eps**2) * z**2 + beta**2 * math.sqrt(T) * z


def g_check(z: float, T: float, eps: float, beta: float) -> float:
    return eps**2 / T * z**2 + beta**2 * z


def rho_linch_continuous(alpha: float, T: float, eps: float, beta: float, dim: int = 1) -> RhoResult:
    """Continuous-level factor for ``u_t = -beta^2 D u - eps^2 D^2 u``.

    ``prefactor`` is the k-independent ``e^{g(z*)}`` multiplying ``factor^k``.
    """
    _check_half(alpha)
    z_star = beta**2 * math.sqrt(T) / (2.0 * eps**2)
    growth = dim * g_tilde(z_star, T, eps, beta)
    return _amplified(alpha, growth)


def rho_linch_semidiscrete(alpha: float, T: float, eps: float, beta: float) -> RhoResult:
    _check_half(alpha)
    z_star = -(beta**2) * T / (2.0 * eps**2)
    growth = -g_check(z_star, T, eps, beta)
    return _amplified(alpha, growth)


def stability_function(theta: float, phi: float) -> float:
    """``R_theta = (1 - (1-theta) phi) / (1 + theta phi)`` evaluated at ``phi``."""
    return (1.0 - (1.0 - theta) * phi) / (1.0 + theta * phi)


def rho_linch_fully_discrete(alpha: float, dt: float, n_t: int, eps: float, beta: float,
                             theta: float) -> float:
    """``|a| R^N(z*) / (1 - |a| R^N(z*))`` with ``phi(z) = -beta^2 z + eps^2/dt z^2``."""
    z_star = beta**2 * dt / (2.0 * eps**2)
    phi = -(beta**2) * z_star + eps**2 / dt * z_star**2
    R = stability_function(theta, phi)
    if R <= 0.0:
        return math.inf
    log_q = math.log(abs(alpha)) + n_t * math.log(R)
    return _ratio(math.exp(log_q)) if log_q < 0.0 else math.inf


def ch_constants(M: float, eps: float, T: float, h: float, n_x: int, dt: float, n_t: int,
                 alpha: float | None = None) -> ChConstants:
    """Constants of the nonlinear estimates (1D norms ``||D||_inf = 4/h^2``, ``||D^2||_inf = 16/h^4``).

    ``L`` is only meaningful when ``h^{3/2} < 4 eps^2 / M``; otherwise
    ``L_valid`` is False and ``C1`` is NaN.
    """
    c_star = M / 2.0 + M**2 / (8.0 * eps**2)
    gamma = None
    if alpha is not None:
        gamma = _ratio(abs(alpha) * math.exp(c_star * T)) if c_star * T < 700 else math.inf
    L = 16.0 * eps**2 / (math.sqrt(n_x) * h**4) - 4.0 * M / h**2
    valid = (M == 0 or h**1.5 < 4.0 * eps**2 / M) and L > 0
    C1 = math.exp(-0.5 * n_t * math.log1p(2.0 * L * dt)) if valid else math.nan
    return ChConstants(c_star, gamma, L, C1, valid)


def rho_ch_semidiscrete(alpha: float, L: float, T: float) -> float:
    if not abs(alpha) < 1.0:
        raise ValueError(f"need |alpha| < 1, got {alpha}")
    if L < 0:
        raise ValueError(f"one-sided Lipschitz constant must be positive, got {L}")
    return _ratio(abs(alpha) * math.exp(-L * T))


def rho_ch_fully_discrete(alpha: float, L: float, dt: float, n_t: int) -> float:
    if not abs(alpha) < 1.0:
        raise ValueError(f"need |alpha| < 1, got {alpha}")
    C1 = math.exp(-0.5 * n_t * math.log1p(2.0 * L * dt))
    return _ratio(abs(alpha) * C1)


def bound_sequence(rho: float, e0: float, k_max: int, prefactor: float = 1.0) -> list:
    """``prefactor * e0 * rho^k`` for k = 1..k_max."""
    return [prefactor * e0 * rho**k for k in range(1, k_max + 1)]


def predicted_iterations(rho: float, e0: float, tol: float) -> int:
    """Smallest k with ``e0 rho^k <= tol``."""
    if e0 <= tol:
        return 0
    if not 0.0 < rho < 1.0:
        return math.inf
    return math.ceil(math.log(tol / e0) / math.log(rho))
