# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled posting-list kernels; drop-in replacements for ``_pykernels``."""

from cpython cimport array
from libc.stdlib cimport qsort
import array

IMPLEMENTATION = "cython"

cdef array.array _QTEMPLATE = array.array("q", [])


cdef int _cmp_q(const void* x, const void* y) noexcept nogil:
    cdef long long a = (<const long long*>x)[0], b = (<const long long*>y)[0]
    return (a > b) - (a < b)


cdef inline Py_ssize_t _gallop(const long long[:] b, Py_ssize_t lo, Py_ssize_t n, long long x) nogil:
    # first index >= lo with b[idx] >= x
    cdef Py_ssize_t step = 1, hi = lo, mid
    while hi < n and b[hi] < x:
        lo = hi + 1
        hi += step
        step <<= 1
    if hi > n:
        hi = n
    while lo < hi:
        mid = (lo + hi) >> 1
        if b[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def intersect_sorted(a, b):
    cdef const long long[:] va
    cdef const long long[:] vb
    if len(a) > len(b):
        a, b = b, a
    cdef Py_ssize_t na = len(a), nb = len(b)
    cdef array.array out = array.clone(_QTEMPLATE, na, zero=False)
    if na == 0:
        return out
    va = a
    vb = b
    cdef long long[:] vo = out
    cdef Py_ssize_t i = 0, j = 0, k = 0
    cdef long long x
    with nogil:
        while i < na and j < nb:
            x = va[i]
            j = _gallop(vb, j, nb, x)
            if j == nb:
                break
            if vb[j] == x:
                vo[k] = x
                k += 1
                j += 1
            i += 1
    array.resize(out, k)
    return out


def merge_disjoint(lists):
    cdef Py_ssize_t total = 0, pos = 0, n, m = len(lists)
    cdef const long long[:] src
    if m == 0:
        return array.clone(_QTEMPLATE, 0, zero=False)
    for lst in lists:
        total += len(lst)
    cdef array.array out = array.clone(_QTEMPLATE, total, zero=False)
    cdef long long[:] vo = out
    cdef Py_ssize_t i
    cdef bint ordered = True
    cdef long long last = -1
    for lst in lists:
        n = len(lst)
        if n == 0:
            continue
        src = lst
        if src[0] <= last:
            ordered = False
        for i in range(n):
            vo[pos + i] = src[i]
        pos += n
        last = src[n - 1]
    if not ordered:
        # leaves are visited in bin order, not id order
        qsort(out.data.as_voidptr, total, sizeof(long long), _cmp_q)
    return out


def fold_deltas(set present, ops, ids, Py_ssize_t start, Py_ssize_t stop):
    cdef const signed char[:] vops = ops
    cdef const long long[:] vids = ids
    cdef Py_ssize_t i
    for i in range(start, stop):
        if vops[i]:
            present.add(vids[i])
        else:
            present.discard(vids[i])
    return stop - start if stop > start else 0
