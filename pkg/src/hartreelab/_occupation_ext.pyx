# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled occupation-basis kernels; same contracts as ``_occupation_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef cnp.int16_t occ_t
ctypedef cnp.int64_t idx_t


def binomial_table(int n_max, int k_max):
    cdef cnp.ndarray[idx_t, ndim=2] B = np.zeros((n_max + 1, k_max + 1), dtype=np.int64)
    cdef int n, k
    for n in range(n_max + 1):
        B[n, 0] = 1
        for k in range(1, k_max + 1):
            if n > 0:
                B[n, k] = B[n - 1, k] + B[n - 1, k - 1]
    return B


cdef inline idx_t _rank_row(const occ_t[:, ::1] occ, Py_ssize_t r, const idx_t[:, ::1] B) nogil:
    cdef Py_ssize_t M = occ.shape[1]
    cdef Py_ssize_t x
    cdef int i = 0, q
    cdef idx_t acc = 0
    for x in range(M):
        for q in range(occ[r, x]):
            i += 1
            acc += B[x + i - 1, i]
    return acc


def ranks(occ_in, binom):
    cdef const occ_t[:, ::1] occ = np.ascontiguousarray(occ_in, dtype=np.int16)
    cdef const idx_t[:, ::1] B = np.ascontiguousarray(binom, dtype=np.int64)
    cdef Py_ssize_t D = occ.shape[0], r
    out = np.empty(D, dtype=np.int64)
    cdef idx_t[::1] o = out
    with nogil:
        for r in range(D):
            o[r] = _rank_row(occ, r, B)
    return out


def basis(int M, int N, binom):
    """Enumerate compositions of ``N`` into ``M`` parts, scattered by rank."""
    cdef const idx_t[:, ::1] B = np.ascontiguousarray(binom, dtype=np.int64)
    cdef idx_t D = B[M + N - 1, N] if N > 0 else 1
    out = np.zeros((D, M), dtype=np.int16)
    cdef occ_t[:, ::1] o = out
    cdef occ_t[::1] cur = np.zeros(M, dtype=np.int16)
    cdef Py_ssize_t x, last
    cdef idx_t k, r
    cdef int i, q, tail
    if N == 0:
        return out
    cur[0] = N
    for k in range(D):
        # rank of the current composition
        r = 0
        i = 0
        for x in range(M):
            for q in range(cur[x]):
                i += 1
                r += B[x + i - 1, i]
        for x in range(M):
            o[r, x] = cur[x]
        if k == D - 1:
            break
        # next composition in reverse-lexicographic order
        last = M - 1
        tail = cur[last]
        cur[last] = 0
        x = last - 1
        while cur[x] == 0:
            x -= 1
        cur[x] -= 1
        cur[x + 1] = tail + 1
    return out


def annihilation_entries(occ_in, binom):
    cdef const occ_t[:, ::1] occ = np.ascontiguousarray(occ_in, dtype=np.int16)
    cdef const idx_t[:, ::1] B = np.ascontiguousarray(binom, dtype=np.int64)
    cdef Py_ssize_t D = occ.shape[0], M = occ.shape[1]
    cdef Py_ssize_t r, x, y, nnz = 0
    cdef int N = 0, i, q, ny
    cdef idx_t before, after
    if D == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e, np.zeros(0)
    for x in range(M):
        N += occ[0, x]
    if N == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e, np.zeros(0)
    cap = D * min(M, N)
    site_a = np.empty(cap, dtype=np.int64)
    src_a = np.empty(cap, dtype=np.int64)
    dst_a = np.empty(cap, dtype=np.int64)
    amp_a = np.empty(cap, dtype=np.float64)
    cdef idx_t[::1] site = site_a, src = src_a, dst = dst_a
    cdef double[::1] amp = amp_a
    with nogil:
        for r in range(D):
            for x in range(M):
                if occ[r, x] == 0:
                    continue
                # remove the last particle sitting on x
                before = 0
                i = 0
                for y in range(M):
                    ny = occ[r, y] - (1 if y == x else 0)
                    for q in range(ny):
                        i += 1
                        before += B[y + i - 1, i]
                site[nnz] = x
                src[nnz] = r
                dst[nnz] = before
                amp[nnz] = sqrt(<double>occ[r, x])
                nnz += 1
    return site_a[:nnz], src_a[:nnz], dst_a[:nnz], amp_a[:nnz]
