# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_kernels_py``."""
from libc.math cimport isinf
from libc.stdlib cimport malloc, free

import numpy as np


def itml_sweep(double[:, ::1] M, const double[:, ::1] V, const double[::1] delta,
               double[::1] zeta, double[::1] lam, double gamma,
               const Py_ssize_t[::1] order, unsigned char[::1] skipped):
    cdef Py_ssize_t d = M.shape[0]
    cdef Py_ssize_t m = order.shape[0]
    cdef Py_ssize_t t, c, i, j
    cdef double p, dl, z, alpha, beta, full, acc
    cdef bint hard = isinf(gamma)
    cdef double gp = 1.0 if hard else gamma / (gamma + 1.0)
    cdef double[::1] Mv = np.empty(d)
    with nogil:
        for t in range(m):
            c = order[t]
            p = 0.0
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc = acc + M[i, j] * V[c, j]
                Mv[i] = acc
                p = p + V[c, i] * acc
            if p <= 0.0:
                skipped[c] = 1
                continue
            dl = delta[c]
            z = zeta[c]
            full = dl * gp * (1.0 / p - 1.0 / z)
            alpha = lam[c] if lam[c] < full else full
            beta = dl * alpha / (1.0 - dl * alpha * p)
            if not hard:
                zeta[c] = gamma * z / (gamma + dl * alpha * z)
            lam[c] = lam[c] - alpha
            for i in range(d):
                for j in range(i, d):
                    acc = beta * (Mv[i] * Mv[j])
                    M[i, j] = M[i, j] + acc
                    if j != i:
                        M[j, i] = M[i, j]


def best_permutation_score(C):
    cdef long long[:, ::1] W = np.ascontiguousarray(C, dtype=np.int64)
    cdef Py_ssize_t k = W.shape[0]
    if k == 0:
        return 0
    cdef int *perm = <int *> malloc(k * sizeof(int))
    cdef int *cnt = <int *> malloc(k * sizeof(int))
    cdef Py_ssize_t i, j
    cdef int tmp
    cdef long long s, best
    if perm == NULL or cnt == NULL:
        free(perm)
        free(cnt)
        raise MemoryError()
    try:
        with nogil:
            for i in range(k):
                perm[i] = <int> i
                cnt[i] = 0
            best = 0
            for i in range(k):
                best = best + W[i, perm[i]]
            # Heap's algorithm, iterative form
            i = 1
            while i < k:
                if cnt[i] < i:
                    if i % 2 == 0:
                        tmp = perm[0]; perm[0] = perm[i]; perm[i] = tmp
                    else:
                        tmp = perm[cnt[i]]; perm[cnt[i]] = perm[i]; perm[i] = tmp
                    s = 0
                    for j in range(k):
                        s = s + W[j, perm[j]]
                    if s > best:
                        best = s
                    cnt[i] += 1
                    i = 1
                else:
                    cnt[i] = 0
                    i += 1
    finally:
        free(perm)
        free(cnt)
    return int(best)
