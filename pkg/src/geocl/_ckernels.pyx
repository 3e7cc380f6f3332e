# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled traversal kernels over CSR adjacency (loop-free, sorted indices).

Same signatures and results as :mod:`geocl._pykernels`.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def betweenness(const i64[::1] indptr, const i64[::1] indices, Py_ssize_t n):
    """Brandes accumulation, halved so each unordered pair counts once."""
    cdef double[::1] cb = np.zeros(n, dtype=np.float64)
    cdef double[::1] sigma = np.zeros(n, dtype=np.float64)
    cdef double[::1] delta = np.zeros(n, dtype=np.float64)
    cdef i64[::1] dist = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] order = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t s, head, tail, k, v, w, idx
    with nogil:
        for s in range(n):
            for k in range(n):
                sigma[k] = 0.0
                delta[k] = 0.0
                dist[k] = -1
            sigma[s] = 1.0
            dist[s] = 0
            order[0] = s
            head = 0
            tail = 1
            while head < tail:
                v = order[head]
                head += 1
                for idx in range(indptr[v], indptr[v + 1]):
                    w = indices[idx]
                    if dist[w] < 0:
                        dist[w] = dist[v] + 1
                        order[tail] = w
                        tail += 1
                    if dist[w] == dist[v] + 1:
                        sigma[w] += sigma[v]
            # predecessors of w are neighbours one level closer to s
            for k in range(tail - 1, 0, -1):
                w = order[k]
                for idx in range(indptr[w], indptr[w + 1]):
                    v = indices[idx]
                    if dist[v] == dist[w] - 1:
                        delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
                cb[w] += delta[w]
        for k in range(n):
            cb[k] *= 0.5
    return np.asarray(cb)


def closeness(const i64[::1] indptr, const i64[::1] indices, Py_ssize_t n):
    """``|C_i| / sum of hop distances within C_i``; 0 for isolated vertices."""
    cdef double[::1] out = np.zeros(n, dtype=np.float64)
    cdef i64[::1] dist = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] order = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t s, head, tail, k, v, w, idx
    cdef i64 total
    with nogil:
        for s in range(n):
            for k in range(n):
                dist[k] = -1
            dist[s] = 0
            order[0] = s
            head = 0
            tail = 1
            total = 0
            while head < tail:
                v = order[head]
                head += 1
                total += dist[v]
                for idx in range(indptr[v], indptr[v + 1]):
                    w = indices[idx]
                    if dist[w] < 0:
                        dist[w] = dist[v] + 1
                        order[tail] = w
                        tail += 1
            if total > 0:
                out[s] = <double>tail / <double>total
    return np.asarray(out)


def triangles_per_vertex(const i64[::1] indptr, const i64[::1] indices, Py_ssize_t n):
    """Triangles through each vertex, by merging sorted neighbour lists."""
    cdef i64[::1] tri = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t u, v, a, b, a_end, b_end, idx
    cdef i64 x, y
    with nogil:
        for u in range(n):
            for idx in range(indptr[u], indptr[u + 1]):
                v = indices[idx]
                if v <= u:
                    continue
                a = indptr[u]
                a_end = indptr[u + 1]
                b = indptr[v]
                b_end = indptr[v + 1]
                while a < a_end and b < b_end:
                    x = indices[a]
                    y = indices[b]
                    if x < y:
                        a += 1
                    elif y < x:
                        b += 1
                    else:
                        if x > v:
                            tri[u] += 1
                            tri[v] += 1
                            tri[x] += 1
                        a += 1
                        b += 1
    return np.asarray(tri)
