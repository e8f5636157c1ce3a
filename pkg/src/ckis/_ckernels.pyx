# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: RBF Gram assembly and the fused elimination sweep.

Mirrors ``_pykernels`` exactly; LAPACK is reached through scipy's Cython
bindings so no Python objects are touched inside the loops.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from scipy.linalg.cython_lapack cimport dpotrf, dpotrs, dtrtri

from .errors import SingularSystemError

cnp.import_array()

JITTER_LEVELS = (0.0, 1e-12, 1e-10, 1e-8)


def rbf_cross_gram(const double[:, :] A, const double[:, :] B,
                   double bandwidth, double amplitude):
    cdef Py_ssize_t m = A.shape[0], l = B.shape[0], p = A.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, d
    cdef double scale = -0.5 / (bandwidth * bandwidth)
    out = np.empty((m, l), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(l):
            s = 0.0
            for k in range(p):
                d = A[i, k] - B[j, k]
                s += d * d
            o[i, j] = amplitude * exp(s * scale)
    return out


cdef int _factor(double[::1, :] F, const double[:, :] K, double lam) noexcept nogil:
    # lower Cholesky of K + lam I into F (column-major); returns LAPACK info
    cdef int n = <int>K.shape[0]
    cdef int info = 0
    cdef Py_ssize_t i, j
    cdef char uplo = b'L'
    for j in range(n):
        for i in range(n):
            F[i, j] = K[i, j]
        F[j, j] += lam
    dpotrf(&uplo, &n, &F[0, 0], &n, &info)
    return info


def elimination_sweep(const double[:, :] K, const double[:] b):
    """Return ``(w, inv_diag, lam)``; see ``_pykernels.elimination_sweep``."""
    cdef int n = <int>K.shape[0]
    cdef int info = 1, one = 1
    cdef Py_ssize_t i, j
    cdef double trace = 0.0, lam = 0.0, s
    cdef char uplo = b'L', diag = b'N'
    for i in range(n):
        trace += K[i, i]
    F_arr = np.empty((n, n), dtype=np.float64, order="F")
    cdef double[::1, :] F = F_arr
    for level in JITTER_LEVELS:
        lam = level * trace / n
        info = _factor(F, K, lam)
        if info == 0:
            for i in range(n):
                if not (F[i, i] == F[i, i]) or F[i, i] <= 0.0:
                    info = 1
                    break
        if info == 0:
            break
    if info != 0:
        raise SingularSystemError(
            f"Cholesky failed for {n}x{n} system at maximum jitter")

    w_arr = np.array(b, dtype=np.float64, copy=True)
    cdef double[::1] w = w_arr
    dpotrs(&uplo, &n, &one, &F[0, 0], &n, &w[0], &n, &info)

    # L^{-1} in place; diag(K^{-1}) = column sums of squares of L^{-1}
    dtrtri(&uplo, &diag, &n, &F[0, 0], &n, &info)
    inv_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] inv_diag = inv_arr
    for j in range(n):
        s = 0.0
        for i in range(j, n):
            s += F[i, j] * F[i, j]
        inv_diag[j] = s
    return w_arr, inv_arr, lam
