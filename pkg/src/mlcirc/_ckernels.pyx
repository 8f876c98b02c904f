# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Must stay result-identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int64_t _inv_mod(int64_t a, int64_t p) nogil:
    # extended Euclid; a is nonzero mod p
    cdef int64_t t = 0, newt = 1, r = p, newr = a, q, tmp
    while newr != 0:
        q = r // newr
        tmp = t - q * newt
        t = newt
        newt = tmp
        tmp = r - q * newr
        r = newr
        newr = tmp
    if t < 0:
        t += p
    return t


cdef Py_ssize_t _eliminate(int64_t[:, ::1] a, int64_t p, bint full, Py_ssize_t[::1] pivots) nogil:
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1]
    cdef Py_ssize_t r = 0, c, i, j, piv
    cdef int64_t inv, f, tmp
    for c in range(cols):
        if r == rows:
            break
        piv = -1
        for i in range(r, rows):
            if a[i, c] != 0:
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            for j in range(c, cols):
                tmp = a[r, j]
                a[r, j] = a[piv, j]
                a[piv, j] = tmp
        inv = _inv_mod(a[r, c], p)
        if inv != 1:
            for j in range(c, cols):
                a[r, j] = (a[r, j] * inv) % p
        for i in range(rows):
            if i == r or (i < r and not full):
                continue
            f = a[i, c]
            if f == 0:
                continue
            for j in range(c, cols):
                if a[r, j] != 0:
                    a[i, j] = (a[i, j] - f * a[r, j]) % p
                    if a[i, j] < 0:
                        a[i, j] += p
        pivots[r] = c
        r += 1
    return r


def rank_modp(a, long long p):
    cdef int64_t[:, ::1] m = np.array(a, dtype=np.int64, order="C") % p
    cdef Py_ssize_t[::1] piv = np.empty(min(m.shape[0], m.shape[1]) + 1, dtype=np.intp)
    cdef Py_ssize_t r
    with nogil:
        r = _eliminate(m, p, False, piv)
    return int(r)


def rref_modp(a, long long p):
    arr = np.array(a, dtype=np.int64, order="C") % p
    cdef int64_t[:, ::1] m = arr
    cdef Py_ssize_t[::1] piv = np.empty(min(m.shape[0], m.shape[1]) + 1, dtype=np.intp)
    cdef Py_ssize_t r
    with nogil:
        r = _eliminate(m, p, True, piv)
    return arr, [int(piv[i]) for i in range(r)]


def first_unbalancing(masks, int n, uint64_t start, long long count, int threshold2):
    """Scan ``count`` colex-consecutive masks from ``start``.

    Returns (mask, scanned) for the first mask Y with
    |2|Y & S| - |S|| >= threshold2 for every S, else (-1, scanned).
    """
    cdef uint64_t[::1] sets = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef Py_ssize_t m = sets.shape[0], j
    cdef int64_t[::1] sizes = np.array([bin(int(s)).count("1") for s in masks], dtype=np.int64)
    cdef uint64_t y = start, low, ripple, limit = (<uint64_t>1) << n
    cdef long long done = 0
    cdef int64_t d
    cdef bint ok = False
    with nogil:
        while done < count and y < limit:
            done += 1
            ok = True
            for j in range(m):
                d = 2 * __builtin_popcountll(y & sets[j]) - sizes[j]
                if d < 0:
                    d = -d
                if d < threshold2:
                    ok = False
                    break
            if ok:
                break
            low = y & (~y + 1)
            ripple = y + low
            y = (((ripple ^ y) >> 2) // low) | ripple
    if ok and done > 0 and y < limit:
        return int(y), done
    return -1, done


def coverage_table(cands, parts, int limit2):
    """uint8 table: [i, j] = 1 iff |2|parts[j] & cands[i]| - |cands[i]|| <= limit2."""
    cdef uint64_t[::1] cs = np.ascontiguousarray(cands, dtype=np.uint64)
    cdef uint64_t[::1] ps = np.ascontiguousarray(parts, dtype=np.uint64)
    out = np.zeros((cs.shape[0], ps.shape[0]), dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef int64_t s, d
    with nogil:
        for i in range(cs.shape[0]):
            s = __builtin_popcountll(cs[i])
            for j in range(ps.shape[0]):
                d = 2 * __builtin_popcountll(cs[i] & ps[j]) - s
                if d < 0:
                    d = -d
                if d <= limit2:
                    o[i, j] = 1
    return out
