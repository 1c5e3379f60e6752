# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop for one file's freshness sample path.

Mirrors ``_kernel_py.simulate_path`` operation for operation so both
backends return bit-identical results for the same stream state.
"""

from libc.math cimport log
from libc.stdint cimport uint64_t

import numpy as np


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef struct Xoshiro:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline double _uniform(Xoshiro* g) nogil:
    cdef uint64_t result = _rotl(g.s1 * 5, 7) * 9
    cdef uint64_t t = g.s1 << 17
    g.s2 ^= g.s0
    g.s3 ^= g.s1
    g.s1 ^= g.s2
    g.s0 ^= g.s3
    g.s2 ^= t
    g.s3 = _rotl(g.s3, 45)
    return <double>(result >> 11) * (1.0 / 9007199254740992.0)


def simulate_path(double lam,
                  const double[::1] chain_rates,
                  const double[::1] chain_success,
                  const double[::1] user_rates,
                  const double[::1] user_success,
                  double horizon,
                  double warmup,
                  state):
    cdef Py_ssize_t m = chain_rates.shape[0]
    cdef Py_ssize_t d = user_rates.shape[0]
    cdef Py_ssize_t nn = m + d
    cdef Py_ssize_t r, k, j, pick
    cdef Xoshiro g
    g.s0 = <uint64_t>state[0]
    g.s1 = <uint64_t>state[1]
    g.s2 = <uint64_t>state[2]
    g.s3 = <uint64_t>state[3]

    fresh_arr = np.zeros(nn, dtype=np.uint8)
    active_arr = np.zeros(nn, dtype=np.float64)
    acc_arr = np.zeros(nn, dtype=np.float64)
    cdef unsigned char[::1] fresh = fresh_arr
    cdef double[::1] active = active_arr
    cdef double[::1] acc = acc_arr

    cdef double t = 0.0, dt, t_end, lo, hi, total, src, x, cum, prob
    cdef long long events = 0, violations = 0
    cdef int any_fresh, upstream

    # a node starts fresh only if every link on its path ever requests
    upstream = 1
    for r in range(m):
        upstream = upstream and chain_rates[r] > 0.0
        fresh[r] = upstream
    for k in range(d):
        fresh[m + k] = (m == 0 or fresh[m - 1]) and user_rates[k] > 0.0

    with nogil:
        while True:
            any_fresh = 0
            for j in range(nn):
                if fresh[j]:
                    any_fresh = 1
                    break
            src = lam if any_fresh else 0.0
            total = src
            for r in range(m):
                if not fresh[r] and (r == 0 or fresh[r - 1]):
                    active[r] = chain_rates[r]
                else:
                    active[r] = 0.0
                total += active[r]
            for k in range(d):
                if not fresh[m + k] and (m == 0 or fresh[m - 1]):
                    active[m + k] = user_rates[k]
                else:
                    active[m + k] = 0.0
                total += active[m + k]

            if total > 0.0:
                dt = -log(1.0 - _uniform(&g)) / total
                t_end = t + dt
            else:
                t_end = horizon
            hi = t_end if t_end < horizon else horizon
            lo = t if t > warmup else warmup
            if hi > lo:
                for j in range(nn):
                    if fresh[j]:
                        acc[j] += hi - lo
            if t_end >= horizon:
                break
            t = t_end

            x = _uniform(&g) * total
            cum = src
            pick = -1
            if x >= cum:
                for j in range(nn):
                    if active[j] > 0.0:
                        pick = j
                        cum += active[j]
                        if x < cum:
                            break
            events += 1
            if pick < 0:
                for j in range(nn):
                    fresh[j] = 0
            else:
                prob = chain_success[pick] if pick < m else user_success[pick - m]
                if prob >= 1.0 or _uniform(&g) < prob:
                    fresh[pick] = 1

            for r in range(1, m):
                if fresh[r] and not fresh[r - 1]:
                    violations += 1
            for k in range(d):
                if fresh[m + k] and m > 0 and not fresh[m - 1]:
                    violations += 1

    return acc_arr, events, violations
