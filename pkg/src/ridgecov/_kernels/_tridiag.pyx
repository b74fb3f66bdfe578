# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batched symmetric tridiagonal solver (Thomas algorithm)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def tridiag_solve_batch(double[:, ::1] diag, double[:, ::1] off, double[:, :, ::1] rhs):
    """Same contract as the numpy fallback: diag (B, m), off (B, m-1),
    rhs (B, m, k) -> solution (B, m, k)."""
    cdef Py_ssize_t B = diag.shape[0]
    cdef Py_ssize_t m = diag.shape[1]
    cdef Py_ssize_t k = rhs.shape[2]
    if off.shape[0] != B or off.shape[1] != m - 1:
        raise ValueError("off-diagonal shape mismatch")
    if rhs.shape[0] != B or rhs.shape[1] != m:
        raise ValueError("rhs shape mismatch")

    dp_arr = np.empty((B, m), dtype=np.float64)
    x_arr = np.array(rhs, dtype=np.float64, copy=True)
    cdef double[:, ::1] dp = dp_arr
    cdef double[:, :, ::1] x = x_arr
    cdef Py_ssize_t b, i, j
    cdef double w

    with nogil:
        for b in range(B):
            dp[b, 0] = diag[b, 0]
            for i in range(1, m):
                w = off[b, i - 1] / dp[b, i - 1]
                dp[b, i] = diag[b, i] - w * off[b, i - 1]
                for j in range(k):
                    x[b, i, j] -= w * x[b, i - 1, j]
            for j in range(k):
                x[b, m - 1, j] /= dp[b, m - 1]
            for i in range(m - 2, -1, -1):
                for j in range(k):
                    x[b, i, j] = (x[b, i, j] - off[b, i] * x[b, i + 1, j]) / dp[b, i]
    return x_arr
