# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled coalition-table kernels (same contract as ``_kernels_py``)."""

from libc.stdlib cimport calloc, free


cdef extern from *:
    int popcount64 "__builtin_popcountll"(unsigned long long x) nogil


def upward_closure(masks, int n):
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    table = bytearray(size)
    cdef unsigned char[::1] t = table
    cdef Py_ssize_t s, bit
    cdef int b
    for m in masks:
        t[<Py_ssize_t>m] = 1
    with nogil:
        for b in range(n):
            bit = (<Py_ssize_t>1) << b
            for s in range(size):
                if t[s] and not (s & bit):
                    t[s | bit] = 1
    return table


def minimal_masks(const unsigned char[::1] table, int n):
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    cdef Py_ssize_t s, bit
    cdef int b, minimal
    out = []
    for s in range(size):
        if not table[s]:
            continue
        minimal = 1
        for b in range(n):
            bit = (<Py_ssize_t>1) << b
            if (s & bit) and table[s ^ bit]:
                minimal = 0
                break
        if minimal:
            out.append(s)
    return out


def count_by_size(const unsigned char[::1] table, int n):
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    cdef Py_ssize_t s
    cdef long long counts[65]
    cdef int j
    for j in range(n + 1):
        counts[j] = 0
    with nogil:
        for s in range(size):
            if table[s]:
                counts[popcount64(<unsigned long long>s)] += 1
    return [counts[j] for j in range(n + 1)]


def pivotal_counts(const unsigned char[::1] table, int n, int player):
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    cdef Py_ssize_t s
    cdef Py_ssize_t bit = (<Py_ssize_t>1) << player
    cdef long long counts[65]
    cdef int j
    for j in range(n):
        counts[j] = 0
    with nogil:
        for s in range(size):
            if not (s & bit) and table[s | bit] and not table[s]:
                counts[popcount64(<unsigned long long>s)] += 1
    return [counts[j] for j in range(n)]


def pivotal_counts_all(const unsigned char[::1] table, int n):
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    cdef Py_ssize_t s, bit
    cdef int p, k
    cdef long long *counts = <long long *>calloc(max(n * n, 1), sizeof(long long))
    if counts == NULL:
        raise MemoryError()
    try:
        with nogil:
            for s in range(size):
                if table[s]:
                    continue
                k = popcount64(<unsigned long long>s)
                for p in range(n):
                    bit = (<Py_ssize_t>1) << p
                    if not (s & bit) and table[s | bit]:
                        counts[p * n + k] += 1
        return [[counts[p * n + k] for k in range(n)] for p in range(n)]
    finally:
        free(counts)
