"""Backend selection for the batched shifted solves.

The compiled extension is used when it imports; set ``PINT4TH_PURE_PYTHON=1``
to force the numpy implementation.  Both expose ``solve_batch`` with the same
signature and pivoting rule.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _banded_py
from .spatial import SingularShiftError

if os.environ.get("PINT4TH_PURE_PYTHON", "").strip() not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _banded as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

_BACKENDS = {"python": _banded_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _chunks(n: int, parts: int):
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def solve_shifted_batch(bands, coefs, rhs, kl: int, ku: int, *, workers: int = 1,
                        backend: str | None = None) -> np.ndarray:
    """Solve ``(sum_j coefs[n, j] B_j) x_n = rhs[n]`` for every ``n``.

    Parameters
    ----------
    bands : ndarray, shape (m, n_dof, kl + ku + 1)
        Real matrices ``B_j`` in row-aligned band storage (see ``spatial.to_band``).
    coefs : ndarray, shape (n_t, m)
        Complex combination coefficients, one row per system.
    rhs : ndarray, shape (n_t, n_dof)
    workers : int
        Contiguous chunks of systems are dispatched to this many threads.
    """
    mod = _BACKENDS[backend or BACKEND]
    bands = np.ascontiguousarray(bands, dtype=float)
    coefs = np.ascontiguousarray(coefs, dtype=complex)
    rhs = np.ascontiguousarray(rhs, dtype=complex)
    if coefs.ndim == 1:
        coefs = coefs[:, None]
    out = np.zeros_like(rhs)

    def run(lo, hi):
        failed = mod.solve_batch(bands, coefs[lo:hi], rhs[lo:hi], out[lo:hi], kl, ku)
        return -1 if failed < 0 else lo + failed

    spans = _chunks(rhs.shape[0], workers)
    if len(spans) <= 1:
        results = [run(0, rhs.shape[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            results = list(pool.map(lambda span: run(*span), spans))
    bad = [idx for idx in results if idx >= 0]
    if bad:
        idx = min(bad)
        raise SingularShiftError(tuple(coefs[idx]), None, index=idx)
    return out
