"""Pure-Python sampling kernel; must stay bit-identical to ``_kernels.pyx``."""

import math

_M = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_TWO_PI = 2.0 * math.pi
_INV_2_53 = 2.0 ** -53

NORMAL, UNIFORM, EXPONENTIAL = 0, 1, 2


def mix64(z):
    z = (z + _GOLDEN) & _M
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M
    return z ^ (z >> 31)


def word(seed, stream, counter):
    """64-bit output for (seed, stream id, counter)."""
    return mix64(mix64(mix64(seed & _M) ^ (stream & _M)) ^ (counter & _M))


def uniform(seed, stream, counter):
    # open interval (0, 1): 53 random bits centred in their bucket
    return ((word(seed, stream, counter) >> 11) + 0.5) * _INV_2_53


def draw(seed, kind, p1, p2, stream, index):
    if kind == EXPONENTIAL:
        return -math.log(uniform(seed, stream, 2 * index)) / p1
    if kind == UNIFORM:
        return p1 + (p2 - p1) * uniform(seed, stream, 2 * index)
    u1 = uniform(seed, stream, 2 * index)
    u2 = uniform(seed, stream, 2 * index + 1)
    return p1 + p2 * (math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2))


def draw_block(seed, kinds, p1s, p2s, streams, start, count):
    """Rows of ``count`` draws, one row per stream, for indices start..start+count-1."""
    seed &= _M
    rows = []
    for kind, p1, p2, stream in zip(kinds, p1s, p2s, streams):
        rows.append([draw(seed, kind, p1, p2, stream, i) for i in range(start, start + count)])
    return rows
