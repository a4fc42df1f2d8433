# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled similarity kernels (hot path of routing and idea clustering).

Mirrors ``_kernels_py``; intersections run as linear merges over sorted
unique int32 arrays, so no Python objects are touched in the inner loops.
"""

BACKEND_NAME = "cython"


cdef inline long _intersect_size(const int[::1] a, Py_ssize_t alo, Py_ssize_t ahi,
                                 const int[::1] b, Py_ssize_t blo, Py_ssize_t bhi) nogil:
    cdef Py_ssize_t i = alo, j = blo
    cdef long inter = 0
    while i < ahi and j < bhi:
        if a[i] == b[j]:
            inter += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return inter


def jaccard_sorted(const int[::1] a, const int[::1] b):
    """Jaccard similarity of two sorted unique id arrays. Both empty -> 1.0."""
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    cdef long inter = _intersect_size(a, 0, na, b, 0, nb)
    return inter / <double>(na + nb - inter)


def novelty_many(const int[::1] flat, const long long[::1] offsets,
                 const int[::1] other, double[::1] out):
    """out[i] = 1 - jaccard(flat[offsets[i]:offsets[i+1]], other)."""
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t i, lo, hi, size
    cdef Py_ssize_t n_other = other.shape[0]
    cdef long inter
    with nogil:
        for i in range(n):
            lo = <Py_ssize_t>offsets[i]
            hi = <Py_ssize_t>offsets[i + 1]
            size = hi - lo
            if size == 0 and n_other == 0:
                out[i] = 0.0
            elif size == 0 or n_other == 0:
                out[i] = 1.0
            else:
                inter = _intersect_size(flat, lo, hi, other, 0, n_other)
                out[i] = 1.0 - inter / <double>(size + n_other - inter)


def best_jaccard(const int[::1] flat, const long long[::1] offsets,
                 const int[::1] query, const long long[::1] candidates):
    """(candidate index, score) maximizing jaccard(query, set_i); ties keep
    the earliest candidate. Empty candidate list -> (-1, -1.0)."""
    cdef Py_ssize_t nq = query.shape[0]
    cdef Py_ssize_t k, idx, lo, hi, size
    cdef long inter
    cdef double score, best = -1.0
    cdef Py_ssize_t best_idx = -1
    with nogil:
        for k in range(candidates.shape[0]):
            idx = <Py_ssize_t>candidates[k]
            lo = <Py_ssize_t>offsets[idx]
            hi = <Py_ssize_t>offsets[idx + 1]
            size = hi - lo
            if nq == 0 and size == 0:
                score = 1.0
            elif nq == 0 or size == 0:
                score = 0.0
            else:
                inter = _intersect_size(flat, lo, hi, query, 0, nq)
                score = inter / <double>(size + nq - inter)
            if score > best:
                best_idx = idx
                best = score
    return best_idx, best
