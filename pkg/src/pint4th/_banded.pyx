# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Batched complex banded solves for the shifted Step-(2) systems.

Each system ``sum_j coef[j] * B_j`` is assembled into LAPACK band storage
and handed to ``zgbsv`` (LU with partial pivoting) without the GIL, so
threads can work on disjoint slices of the batch.
"""

from libc.stdlib cimport malloc, free
from scipy.linalg.cython_lapack cimport zgbsv

cdef extern from "<complex.h>" nogil:
    double cabs(double complex)

cdef double DBL_EPS = 2.220446049250313e-16


cdef int _solve_one(const double[:, :, ::1] bands,
                    const double complex[::1] coef,
                    const double complex[::1] rhs,
                    double complex[::1] out,
                    double complex* ab,
                    int* ipiv,
                    int n, int kl, int ku) noexcept nogil:
    cdef int m = <int> bands.shape[0]
    cdef int nb = kl + ku + 1
    cdef int ldab = 2 * kl + ku + 1
    cdef int nrhs = 1, info = 0
    cdef int i, d, j, col
    cdef double complex acc
    cdef double scale = 0.0, a

    for i in range(ldab * n):
        ab[i] = 0.0
    for i in range(n):
        for d in range(nb):
            col = i + d - kl
            if col < 0 or col >= n:
                continue
            acc = 0.0
            for j in range(m):
                acc = acc + coef[j] * bands[j, i, d]
            ab[(2 * kl + ku - d) + col * ldab] = acc
            a = cabs(acc)
            if a > scale:
                scale = a
        out[i] = rhs[i]
    if scale == 0.0:
        return 1
    zgbsv(&n, &kl, &ku, &nrhs, ab, &ldab, ipiv, &out[0], &n, &info)
    if info != 0:
        return 1
    for i in range(n):
        # diagonal of U sits in row kl + ku of the factored storage
        if not (cabs(ab[kl + ku + i * ldab]) > 16.0 * DBL_EPS * scale):
            return 1
    return 0


def solve_batch(const double[:, :, ::1] bands, const double complex[:, ::1] coefs,
                const double complex[:, ::1] rhs, double complex[:, ::1] out,
                Py_ssize_t kl, Py_ssize_t ku):
    """Solve ``sum_j coefs[s, j] * B_j x_s = rhs[s]`` for every batch row ``s``.

    ``bands[j]`` holds ``B_j`` row-aligned: ``bands[j, i, d] = B_j[i, i + d - kl]``.
    Returns the first batch index whose matrix is numerically singular, or -1.
    """
    cdef Py_ssize_t nbatch = rhs.shape[0]
    cdef int n = <int> rhs.shape[1]
    cdef int ikl = <int> kl, iku = <int> ku
    cdef Py_ssize_t s, failed = -1
    cdef double complex* ab
    cdef int* ipiv
    if bands.shape[1] != n or bands.shape[2] != kl + ku + 1:
        raise ValueError("band array does not match rhs size / bandwidths")
    if coefs.shape[0] != nbatch or coefs.shape[1] != bands.shape[0]:
        raise ValueError("coefficient array does not match batch / band count")
    if out.shape[0] != nbatch or out.shape[1] != n:
        raise ValueError("output array has the wrong shape")
    if nbatch == 0:
        return -1
    ab = <double complex*> malloc((2 * kl + ku + 1) * n * sizeof(double complex))
    ipiv = <int*> malloc(n * sizeof(int))
    if ab == NULL or ipiv == NULL:
        free(ab)
        free(ipiv)
        raise MemoryError()
    with nogil:
        for s in range(nbatch):
            if _solve_one(bands, coefs[s], rhs[s], out[s], ab, ipiv, n, ikl, iku):
                failed = s
                break
    free(ab)
    free(ipiv)
    return failed
