"""Strang-type alpha-circulant time matrices and their scaled-DFT diagonalization.

For ``C`` alpha-circulant, ``C = V D V^{-1}`` with ``V = Gamma^{-1} F^*`` where
``F[l, m] = w^{l m}/sqrt(N)``, ``w = exp(2 pi i/N)`` and
``Gamma = diag(alpha^{r/N})``.  All eigenvalue sequences are computed from the
first columns with the same transform, so they pair up index by index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

ALPHA_TESTED_MIN = 1e-3


@dataclass(frozen=True)
class AlphaCirculant:
    n_t: int
    alpha: float
    dt: float
    theta: float

    @property
    def first_col_c1(self) -> np.ndarray:
        col = np.zeros(self.n_t)
        col[0], col[1] = 1.0 / self.dt, -1.0 / self.dt
        return col

    @property
    def first_col_c2(self) -> np.ndarray:
        col = np.zeros(self.n_t)
        col[0], col[1] = self.theta, 1.0 - self.theta
        return col

    @property
    def first_col_c3(self) -> np.ndarray:
        col = np.zeros(self.n_t)
        col[1] = 1.0
        return col

    def dense(self, which: int) -> np.ndarray:
        col = {1: self.first_col_c1, 2: self.first_col_c2, 3: self.first_col_c3}[which]
        return alpha_circulant_from_column(col, self.alpha)


def alpha_circulant_from_column(col, alpha: float) -> np.ndarray:
    """Dense alpha-circulant: ``C[i, j] = col[i-j]`` below, ``alpha*col[n+i-j]`` above."""
    col = np.asarray(col)
    n = col.size
    i, j = np.indices((n, n))
    diff = i - j
    out = col[diff % n].astype(np.result_type(col, float))
    out[diff < 0] *= alpha
    return out


def build_circulants(n_t: int, alpha: float, dt: float, theta: float) -> AlphaCirculant:
    if int(n_t) != n_t or n_t < 2:
        raise ValueError(f"n_t must be an integer >= 2, got {n_t!r}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta!r}")
    if alpha < ALPHA_TESTED_MIN:
        warnings.warn(
            f"alpha={alpha:g} is below {ALPHA_TESTED_MIN:g}; roundoff in the scaled "
            "transforms grows like 1/alpha",
            stacklevel=2,
        )
    return AlphaCirculant(int(n_t), float(alpha), float(dt), float(theta))


def gamma_scaling(n_t: int, alpha: float) -> np.ndarray:
    return np.exp(np.arange(n_t) * (math.log(alpha) / n_t))


def dft_matrix(n: int) -> np.ndarray:
    """Unitary ``F`` with positive-exponent entries ``exp(2 pi i l m/n)/sqrt(n)``."""
    lm = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(2j * np.pi * lm / n) / np.sqrt(n)


def _forward(x: np.ndarray, method: str) -> np.ndarray:
    # F x along axis 0
    if method == "fft":
        return np.fft.ifft(x, axis=0, norm="ortho")
    return dft_matrix(x.shape[0]) @ x


def _backward(x: np.ndarray, method: str) -> np.ndarray:
    # F^* x along axis 0
    if method == "fft":
        return np.fft.fft(x, axis=0, norm="ortho")
    return dft_matrix(x.shape[0]).conj().T @ x


@dataclass(frozen=True)
class DiagonalizationData:
    gamma: np.ndarray
    eigs_c1: np.ndarray
    eigs_c2: np.ndarray
    eigs_c3: np.ndarray
    method: str = "fft"

    @property
    def n_t(self) -> int:
        return self.gamma.size


def diagonalize(ac: AlphaCirculant, method: str = "fft") -> DiagonalizationData:
    """Eigenvalues ``diag(sqrt(N) F Gamma C_j(:, 1))`` for j = 1, 2, 3."""
    if method not in ("fft", "dense"):
        raise ValueError(f"unknown transform method {method!r}")
    gamma = gamma_scaling(ac.n_t, ac.alpha)
    scale = math.sqrt(ac.n_t)

    def eig(col):
        return scale * _forward((gamma * col)[:, None].astype(complex), method)[:, 0]

    data = DiagonalizationData(
        gamma=gamma,
        eigs_c1=eig(ac.first_col_c1),
        eigs_c2=eig(ac.first_col_c2),
        eigs_c3=eig(ac.first_col_c3),
        method=method,
    )
    for arr in (data.gamma, data.eigs_c1, data.eigs_c2, data.eigs_c3):
        arr.setflags(write=False)
    return data


def eigenvector_matrix(gamma: np.ndarray) -> np.ndarray:
    """Dense ``V = Gamma^{-1} F^*``."""
    return (1.0 / gamma)[:, None] * dft_matrix(gamma.size).conj().T


def _check_blocks(x, gamma):
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != gamma.size:
        raise ValueError(f"expected {gamma.size} time blocks, got array of shape {x.shape}")
    return x


def step1_transform(b, gamma, method: str = "fft") -> np.ndarray:
    """``S_1 = (F Gamma (x) I) b`` for ``b`` of shape ``(n_t, n_dof)``."""
    b = _check_blocks(b, gamma)
    return _forward(gamma[:, None] * b.astype(complex), method)


def step3_transform(s, gamma, method: str = "fft") -> np.ndarray:
    """``U = (Gamma^{-1} F^* (x) I) s``; inverse of :func:`step1_transform`."""
    s = _check_blocks(s, gamma)
    return _backward(s.astype(complex), method) / gamma[:, None]
