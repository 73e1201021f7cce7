# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: subset Cholesky log-determinants and DP sweeps."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, NAN
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef int _chol_logdet(double* a, Py_ssize_t d, double* out) noexcept nogil:
    # in-place lower Cholesky of a row-major d x d buffer
    cdef Py_ssize_t i, j, p
    cdef double s, acc = 0.0
    for j in range(d):
        s = a[j * d + j]
        for p in range(j):
            s -= a[j * d + p] * a[j * d + p]
        if not (s > 0.0):
            return 0
        s = sqrt(s)
        a[j * d + j] = s
        acc += log(s)
        for i in range(j + 1, d):
            s = a[i * d + j]
            for p in range(j):
                s -= a[i * d + p] * a[j * d + p]
            a[i * d + j] = s / a[j * d + j]
    out[0] = 2.0 * acc
    return 1


def subset_logdet(const double[:, ::1] K, idx, jitter):
    cdef const cnp.intp_t[:, ::1] ix = np.ascontiguousarray(idx, dtype=np.intp)
    cdef Py_ssize_t B = ix.shape[0], d = ix.shape[1]
    cdef double[::1] jit = np.array(
        np.broadcast_to(np.asarray(jitter, dtype=np.float64), (B,)), dtype=np.float64)
    out_arr = np.full(B, np.nan)
    ok_arr = np.zeros(B, dtype=np.uint8)
    cdef double[::1] out = out_arr
    cdef unsigned char[::1] ok = ok_arr
    cdef Py_ssize_t b, i, j
    cdef double* buf
    if B == 0:
        return out_arr, ok_arr
    if d == 0:
        out_arr[:] = 0.0
        ok_arr[:] = 1
        return out_arr, ok_arr
    buf = <double*> malloc(d * d * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for b in range(B):
                for i in range(d):
                    for j in range(i + 1):
                        buf[i * d + j] = K[ix[b, i], ix[b, j]]
                    buf[i * d + i] += jit[b]
                ok[b] = _chol_logdet(buf, d, &out[b])
                if not ok[b]:
                    out[b] = NAN
    finally:
        free(buf)
    return out_arr, ok_arr


def first_argmax(values, double tol):
    cdef const double[:, ::1] v = np.ascontiguousarray(np.atleast_2d(values), dtype=np.float64)
    cdef Py_ssize_t R = v.shape[0], C = v.shape[1], i, j
    res = np.empty(R, dtype=np.int64)
    cdef cnp.int64_t[::1] r = res
    cdef double top
    with nogil:
        for i in range(R):
            top = v[i, 0]
            for j in range(1, C):
                if v[i, j] > top:
                    top = v[i, j]
            for j in range(C):
                if v[i, j] >= top - tol:
                    r[i] = j
                    break
    return res


def dp_backward(const double[:, ::1] interior, const double[:, ::1] terminal,
                Py_ssize_t sweeps, double tol):
    cdef Py_ssize_t W = terminal.shape[0], chi = terminal.shape[1]
    cdef Py_ssize_t stride = W // chi
    values_arr = np.empty((sweeps + 1, W))
    best_arr = np.empty((sweeps + 1, W), dtype=np.int64)
    cdef double[:, ::1] values = values_arr
    cdef cnp.int64_t[:, ::1] best = best_arr
    cdef double* cand = <double*> malloc(chi * sizeof(double))
    cdef Py_ssize_t s, w, a, base, pick
    cdef double top
    if cand == NULL:
        raise MemoryError()
    try:
        with nogil:
            for w in range(W):
                top = terminal[w, 0]
                for a in range(1, chi):
                    if terminal[w, a] > top:
                        top = terminal[w, a]
                for a in range(chi):
                    if terminal[w, a] >= top - tol:
                        break
                values[sweeps, w] = terminal[w, a]
                best[sweeps, w] = a
            for s in range(sweeps - 1, -1, -1):
                for w in range(W):
                    base = (w % stride) * chi
                    for a in range(chi):
                        cand[a] = interior[w, a] + values[s + 1, base + a]
                    top = cand[0]
                    for a in range(1, chi):
                        if cand[a] > top:
                            top = cand[a]
                    pick = 0
                    for a in range(chi):
                        if cand[a] >= top - tol:
                            pick = a
                            break
                    values[s, w] = cand[pick]
                    best[s, w] = pick
    finally:
        free(cand)
    return values_arr, best_arr
