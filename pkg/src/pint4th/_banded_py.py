"""Pure-Python twin of the compiled batch solver.

Same storage convention, same singularity rule, same return value; the
factorization is LAPACK ``zgbsv`` called once per system through scipy.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

_EPS = np.finfo(float).eps


def _lapack_storage(band: np.ndarray, kl: int, ku: int) -> np.ndarray:
    """Row-aligned ``band[i, d] = M[i, i+d-kl]`` to LAPACK ``ab[kl+ku+i-j, j]``."""
    n = band.shape[0]
    ab = np.zeros((2 * kl + ku + 1, n), dtype=band.dtype)
    for d in range(kl + ku + 1):
        off = d - kl  # column j = i + off
        lo, hi = max(0, -off), min(n, n - off)
        ab[2 * kl + ku - d, lo + off:hi + off] = band[lo:hi, d]
    return ab


def solve_batch(bands, coefs, rhs, out, kl: int, ku: int) -> int:
    """Solve ``sum_j coefs[s, j] * B_j x_s = rhs[s]`` row by row into ``out``.

    Returns the first singular batch index, or -1.
    """
    bands = np.asarray(bands)
    if bands.shape[1] != rhs.shape[1] or bands.shape[2] != kl + ku + 1:
        raise ValueError("band array does not match rhs size / bandwidths")
    if coefs.shape[0] != rhs.shape[0] or coefs.shape[1] != bands.shape[0]:
        raise ValueError("coefficient array does not match batch / band count")
    for s in range(rhs.shape[0]):
        band = np.tensordot(coefs[s], bands, axes=1)
        scale = np.abs(band).max()
        if scale == 0.0:
            return s
        ab = _lapack_storage(band, kl, ku)
        lub, _, x, info = lapack.zgbsv(kl, ku, ab, rhs[s])
        if info != 0 or np.abs(lub[kl + ku]).min() <= 16.0 * _EPS * scale:
            return s
        out[s] = x
    return -1
