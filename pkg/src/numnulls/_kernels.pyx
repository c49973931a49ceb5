# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernel; bit-identical twin of ``_kernels_py``."""

from libc.math cimport log, sqrt, cos
from libc.stdint cimport uint64_t

cdef double _TWO_PI = 6.283185307179586
cdef double _INV_2_53 = 1.1102230246251565e-16

NORMAL, UNIFORM, EXPONENTIAL = 0, 1, 2


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = z + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _word(uint64_t seed, uint64_t stream, uint64_t counter) nogil:
    return _mix64(_mix64(_mix64(seed) ^ stream) ^ counter)


cdef inline double _uniform(uint64_t seed, uint64_t stream, uint64_t counter) nogil:
    return (<double>(_word(seed, stream, counter) >> 11) + 0.5) * _INV_2_53


cdef inline double _draw(uint64_t seed, int kind, double p1, double p2,
                         uint64_t stream, uint64_t index) nogil:
    cdef double u1, u2
    if kind == 2:
        return -log(_uniform(seed, stream, 2 * index)) / p1
    if kind == 1:
        return p1 + (p2 - p1) * _uniform(seed, stream, 2 * index)
    u1 = _uniform(seed, stream, 2 * index)
    u2 = _uniform(seed, stream, 2 * index + 1)
    return p1 + p2 * (sqrt(-2.0 * log(u1)) * cos(_TWO_PI * u2))


_M = 0xFFFFFFFFFFFFFFFF


def mix64(z):
    return _mix64(<uint64_t>(z & _M))


def word(seed, stream, counter):
    return _word(<uint64_t>(seed & _M), <uint64_t>(stream & _M), <uint64_t>(counter & _M))


def uniform(seed, stream, counter):
    return _uniform(<uint64_t>(seed & _M), <uint64_t>(stream & _M), <uint64_t>(counter & _M))


def draw(seed, int kind, double p1, double p2, stream, index):
    return _draw(<uint64_t>(seed & _M), kind, p1, p2, <uint64_t>(stream & _M), <uint64_t>index)


def draw_block(seed, kinds, p1s, p2s, streams, Py_ssize_t start, Py_ssize_t count):
    cdef uint64_t s = <uint64_t>(seed & _M)
    cdef uint64_t st
    cdef int kind
    cdef double a, b
    cdef Py_ssize_t i
    cdef list row
    rows = []
    for kind, a, b, stream in zip(kinds, p1s, p2s, streams):
        st = <uint64_t>(stream & _M)
        row = [0.0] * count
        for i in range(count):
            row[i] = _draw(s, kind, a, b, st, <uint64_t>(start + i))
        rows.append(row)
    return rows
