# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: edit distance and the Poisson CG solve."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdlib cimport malloc, free

cnp.import_array()


def levenshtein(a, b):
    """Unit-cost edit distance between two sequences of code points."""
    cdef Py_ssize_t n, m, i, j
    cdef int cost, best, v
    cdef int *prev
    cdef int *cur
    cdef int *tmp
    if len(a) < len(b):
        a, b = b, a
    cdef int[::1] sa = np.asarray(a, dtype=np.int32).reshape(-1)
    cdef int[::1] sb = np.asarray(b, dtype=np.int32).reshape(-1)
    n = sa.shape[0]
    m = sb.shape[0]
    if m == 0:
        return n
    prev = <int *> malloc((m + 1) * sizeof(int))
    cur = <int *> malloc((m + 1) * sizeof(int))
    if prev == NULL or cur == NULL:
        free(prev)
        free(cur)
        raise MemoryError()
    try:
        for j in range(m + 1):
            prev[j] = j
        for i in range(1, n + 1):
            cur[0] = i
            for j in range(1, m + 1):
                cost = 0 if sa[i - 1] == sb[j - 1] else 1
                best = prev[j] + 1
                v = cur[j - 1] + 1
                if v < best:
                    best = v
                v = prev[j - 1] + cost
                if v < best:
                    best = v
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
        return prev[m]
    finally:
        free(prev)
        free(cur)


cdef void _laplace(double[:, ::1] x, double[:, ::1] out) nogil:
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1], i, j
    cdef double s
    for i in range(h):
        for j in range(w):
            s = 4.0 * x[i, j]
            if i > 0:
                s -= x[i - 1, j]
            if i < h - 1:
                s -= x[i + 1, j]
            if j > 0:
                s -= x[i, j - 1]
            if j < w - 1:
                s -= x[i, j + 1]
            out[i, j] = s


cdef double _true_residual(double[:, ::1] b, double[:, ::1] x,
                           double[:, ::1] r) nogil:
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1], i, j
    cdef double m = 0.0
    _laplace(x, r)
    for i in range(h):
        for j in range(w):
            r[i, j] = b[i, j] - r[i, j]
            if fabs(r[i, j]) > m:
                m = fabs(r[i, j])
    return m


cdef long _cg_channel(double[:, ::1] b, double[:, ::1] x, double[:, ::1] r,
                      double[:, ::1] p, double[:, ::1] ap, double tol,
                      long max_iters, double *resid_out) nogil:
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1], i, j
    cdef double rr = 0.0, rr_new, pap, alpha, beta, rmax
    cdef long iters = 0
    rmax = _true_residual(b, x, r)
    for i in range(h):
        for j in range(w):
            p[i, j] = r[i, j]
            rr += r[i, j] * r[i, j]
    while iters < max_iters:
        if rmax <= tol:
            rmax = _true_residual(b, x, r)
            if rmax <= tol:
                break
            rr = 0.0
            for i in range(h):
                for j in range(w):
                    p[i, j] = r[i, j]
                    rr += r[i, j] * r[i, j]
        _laplace(p, ap)
        pap = 0.0
        for i in range(h):
            for j in range(w):
                pap += p[i, j] * ap[i, j]
        alpha = rr / pap
        rr_new = 0.0
        rmax = 0.0
        for i in range(h):
            for j in range(w):
                x[i, j] += alpha * p[i, j]
                r[i, j] -= alpha * ap[i, j]
                rr_new += r[i, j] * r[i, j]
                if fabs(r[i, j]) > rmax:
                    rmax = fabs(r[i, j])
        beta = rr_new / rr
        for i in range(h):
            for j in range(w):
                p[i, j] = r[i, j] + beta * p[i, j]
        rr = rr_new
        iters += 1
    resid_out[0] = _true_residual(b, x, r)
    return iters


def cg_poisson(rhs, x0, double tol, long max_iters):
    """Solve ``L x = rhs`` per channel, ``L`` the 5-point Dirichlet Laplacian.

    ``rhs`` and ``x0`` are float64 arrays of shape (channels, h, w). Returns
    ``(x, iterations, max_residual)``; iterations is the maximum over channels.
    """
    cdef cnp.ndarray b_arr = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef cnp.ndarray x_arr = np.array(x0, dtype=np.float64, copy=True, order="C")
    cdef double[:, :, ::1] b = b_arr
    cdef double[:, :, ::1] x = x_arr
    cdef Py_ssize_t c, nch = b.shape[0]
    cdef double[:, ::1] r = np.empty((b.shape[1], b.shape[2]))
    cdef double[:, ::1] p = np.empty((b.shape[1], b.shape[2]))
    cdef double[:, ::1] ap = np.empty((b.shape[1], b.shape[2]))
    cdef long iters, worst_iters = 0
    cdef double resid = 0.0, worst_resid = 0.0
    for c in range(nch):
        with nogil:
            iters = _cg_channel(b[c], x[c], r, p, ap, tol, max_iters, &resid)
        if iters > worst_iters:
            worst_iters = iters
        if resid > worst_resid:
            worst_resid = resid
    return x_arr, worst_iters, worst_resid
