# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Semantics must match ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, ceil, floor, sqrt, erfc, fabs, log2, M_PI

cnp.import_array()


cdef inline bint _dominates(const double[:, ::1] f, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef Py_ssize_t m, nobj = f.shape[1]
    cdef bint strict = False
    for m in range(nobj):
        if f[a, m] > f[b, m]:
            return False
        if f[a, m] < f[b, m]:
            strict = True
    return strict


def nondominated_ranks(double[:, ::1] objs):
    """Front index (0 = non-dominated) of every row of ``objs``."""
    cdef Py_ssize_t n = objs.shape[0], i, j, head, tail, level_end
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rank_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] count_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] dom_arr = np.zeros((n, n), dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] queue_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] rank = rank_arr
    cdef long long[::1] count = count_arr
    cdef unsigned char[:, ::1] dom = dom_arr
    cdef long long[::1] queue = queue_arr

    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if _dominates(objs, i, j):
                    dom[i, j] = 1
                    count[j] += 1
                elif _dominates(objs, j, i):
                    dom[j, i] = 1
                    count[i] += 1
        tail = 0
        for i in range(n):
            if count[i] == 0:
                rank[i] = 0
                queue[tail] = i
                tail += 1
        head = 0
        while head < tail:
            level_end = tail
            while head < level_end:
                i = queue[head]
                head += 1
                for j in range(n):
                    if dom[i, j]:
                        count[j] -= 1
                        if count[j] == 0:
                            rank[j] = rank[i] + 1
                            queue[tail] = j
                            tail += 1
    return rank_arr


def spread_gaussians(double[::1] centers, double[::1] weights, double z0, double dz,
                     Py_ssize_t nz, double sigma, double halfwidth):
    """Weighted sum of N(z; c_s, sigma^2) on the grid z_j = z0 + j*dz.

    Each Gaussian is truncated at ``halfwidth`` standard deviations.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(nz, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t s, j, j0, j1, ns = centers.shape[0]
    cdef double c, w, u, norm = 1.0 / (sigma * sqrt(2.0 * M_PI)), reach = halfwidth * sigma
    with nogil:
        for s in range(ns):
            w = weights[s]
            if w == 0.0:
                continue
            c = centers[s]
            j0 = <Py_ssize_t> ceil((c - reach - z0) / dz)
            j1 = <Py_ssize_t> floor((c + reach - z0) / dz)
            if j0 < 0:
                j0 = 0
            if j1 > nz - 1:
                j1 = nz - 1
            for j in range(j0, j1 + 1):
                u = (z0 + j * dz - c) / sigma
                out[j] += w * norm * exp(-0.5 * u * u)
    return out_arr


cdef inline void _cell_probs(const double* t, double* tail, double* out, Py_ssize_t nl) noexcept nogil:
    cdef Py_ssize_t l
    for l in range(nl + 1):
        tail[l] = 0.0 if fabs(t[l]) > 40.0 else 0.5 * erfc(fabs(t[l]) / sqrt(2.0))
    for l in range(nl):
        if t[l] > 0:
            out[l] = tail[l] - tail[l + 1]
        elif t[l + 1] <= 0:
            out[l] = tail[l + 1] - tail[l]
        else:
            out[l] = 1.0 - tail[l] - tail[l + 1]


def quantized_stats(double[:, ::1] h, double[::1] weights, double[::1] probs, double sigma,
                    double[::1] thresholds, double pmf_floor):
    """Per-(particle, sensor) quantized Fisher factor, weighted level pmf and conditional entropy.

    Returns ``(kappa (n, k), marginal (k, L), cond_bits (k,))``.
    """
    cdef Py_ssize_t n = h.shape[0], k = h.shape[1], nl = thresholds.shape[0] - 1, s, j, l
    cdef cnp.ndarray[cnp.float64_t, ndim=2] kappa_arr = np.zeros((n, k), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] marg_arr = np.zeros((k, nl), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cond_arr = np.zeros(k, dtype=np.float64)
    cdef double[:, ::1] kappa = kappa_arr
    cdef double[:, ::1] marg = marg_arr
    cdef double[::1] cond = cond_arr
    cdef double[::1] t = np.empty(nl + 1)
    cdef double[::1] tail = np.empty(nl + 1)
    cdef double[::1] e = np.empty(nl + 1)
    cdef double[::1] sig = np.empty(nl)
    cdef double[::1] noise = np.empty(nl)
    cdef double p, w, pmf, d, acc, ent, scale = 1.0 / (2.0 * M_PI * sigma * sigma)

    with nogil:
        for l in range(nl + 1):
            t[l] = thresholds[l] / sigma
        _cell_probs(&t[0], &tail[0], &noise[0], nl)
        for s in range(n):
            w = weights[s]
            for j in range(k):
                p = probs[j]
                for l in range(nl + 1):
                    t[l] = (thresholds[l] - h[s, j]) / sigma
                    e[l] = 0.0 if fabs(t[l]) > 40.0 else exp(-0.5 * t[l] * t[l])
                _cell_probs(&t[0], &tail[0], &sig[0], nl)
                acc = 0.0
                ent = 0.0
                for l in range(nl):
                    pmf = p * sig[l] + (1.0 - p) * noise[l]
                    marg[j, l] += w * pmf
                    if pmf > 0:
                        ent -= pmf * log2(pmf)
                    if pmf > pmf_floor:
                        d = e[l] - e[l + 1]
                        acc += d * d / pmf
                kappa[s, j] = acc * scale
                cond[j] += w * ent
    return kappa_arr, marg_arr, cond_arr
