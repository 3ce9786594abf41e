# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels.

Mirrors ``_python.py`` operation for operation; the numpy module is the
reference for semantics, this one exists for speed.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    long long __builtin_popcountll(unsigned long long x)

BACKEND_NAME = "native"

cdef int[16] CIRCLE_DX = [0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3, -3, -3, -2, -1]
cdef int[16] CIRCLE_DY = [-3, -3, -2, -1, 0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3]


def conv_sep_replicate(const double[:, ::1] img, const double[::1] kernel):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef Py_ssize_t n = kernel.shape[0], r = (n - 1) // 2
    cdef Py_ssize_t y, x, i, xx, yy
    cdef double acc
    tmp_arr = np.empty((h, w), dtype=np.float64)
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr

    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(n):
                xx = x + i - r
                if xx < 0:
                    xx = 0
                elif xx >= w:
                    xx = w - 1
                acc += kernel[i] * img[y, xx]
            tmp[y, x] = acc
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(n):
                yy = y + i - r
                if yy < 0:
                    yy = 0
                elif yy >= h:
                    yy = h - 1
                acc += kernel[i] * tmp[yy, x]
            out[y, x] = acc
    return out_arr


def fed_step(const double[:, ::1] L, const double[:, ::1] g, double tau):
    cdef Py_ssize_t h = L.shape[0], w = L.shape[1]
    cdef Py_ssize_t y, x
    cdef double fe, fw, fs, fn
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for y in range(h):
        for x in range(w):
            fe = 0.5 * (g[y, x] + g[y, x + 1]) * (L[y, x + 1] - L[y, x]) if x + 1 < w else 0.0
            fw = 0.5 * (g[y, x - 1] + g[y, x]) * (L[y, x] - L[y, x - 1]) if x > 0 else 0.0
            fs = 0.5 * (g[y, x] + g[y + 1, x]) * (L[y + 1, x] - L[y, x]) if y + 1 < h else 0.0
            fn = 0.5 * (g[y - 1, x] + g[y, x]) * (L[y, x] - L[y - 1, x]) if y > 0 else 0.0
            out[y, x] = L[y, x] + tau * (fe - fw + fs - fn)
    return out_arr


def fast_score_map(const double[:, ::1] img, double t):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef Py_ssize_t y, x, k, start, j
    cdef double center, d, arc_min, best_bright, best_dark, score
    cdef double[16] diff
    out_arr = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if h < 7 or w < 7:
        return out_arr
    for y in range(3, h - 3):
        for x in range(3, w - 3):
            center = img[y, x]
            for k in range(16):
                diff[k] = img[y + CIRCLE_DY[k], x + CIRCLE_DX[k]] - center
            best_bright = -1.0
            best_dark = -1.0
            for start in range(16):
                arc_min = diff[start] - t
                if arc_min > best_bright:
                    for j in range(1, 9):
                        d = diff[(start + j) % 16] - t
                        if d < arc_min:
                            arc_min = d
                            if arc_min <= best_bright:
                                break
                    if arc_min > best_bright:
                        best_bright = arc_min
                arc_min = -diff[start] - t
                if arc_min > best_dark:
                    for j in range(1, 9):
                        d = -diff[(start + j) % 16] - t
                        if d < arc_min:
                            arc_min = d
                            if arc_min <= best_dark:
                                break
                    if arc_min > best_dark:
                        best_dark = arc_min
            score = best_bright if best_bright > best_dark else best_dark
            if score > 0.0:
                out[y, x] = score + t
    return out_arr


def hamming_knn(const cnp.uint64_t[:, ::1] query, const cnp.uint64_t[:, ::1] ref, int k):
    cdef Py_ssize_t nq = query.shape[0], nr = ref.shape[0], nw = query.shape[1]
    cdef Py_ssize_t i, j, word
    cdef long long d, b0, b1
    cdef Py_ssize_t i0, i1
    idx_arr = np.empty((nq, k), dtype=np.int64)
    dist_arr = np.empty((nq, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] idx = idx_arr
    cdef cnp.int64_t[:, ::1] dist = dist_arr
    for i in range(nq):
        b0 = 1 << 62
        b1 = 1 << 62
        i0 = -1
        i1 = -1
        for j in range(nr):
            d = 0
            for word in range(nw):
                d += __builtin_popcountll(query[i, word] ^ ref[j, word])
            if d < b0:
                b1 = b0
                i1 = i0
                b0 = d
                i0 = j
            elif d < b1:
                b1 = d
                i1 = j
        idx[i, 0] = i0
        dist[i, 0] = b0
        if k == 2:
            idx[i, 1] = i1
            dist[i, 1] = b1
    return idx_arr, dist_arr


def hamming_select(const cnp.uint64_t[:, ::1] query, const cnp.uint64_t[:, ::1] ref,
                   const cnp.int64_t[::1] candidates, const cnp.int64_t[::1] counts, int k):
    cdef Py_ssize_t nq = query.shape[0], nw = query.shape[1]
    cdef Py_ssize_t i, c, word, start = 0
    cdef cnp.int64_t j
    cdef long long d, b0, b1
    cdef cnp.int64_t i0, i1
    idx_arr = np.full((nq, k), -1, dtype=np.int64)
    dist_arr = np.full((nq, k), -1, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] idx = idx_arr
    cdef cnp.int64_t[:, ::1] dist = dist_arr
    for i in range(nq):
        b0 = 1 << 62
        b1 = 1 << 62
        i0 = -1
        i1 = -1
        for c in range(start, start + counts[i]):
            j = candidates[c]
            d = 0
            for word in range(nw):
                d += __builtin_popcountll(query[i, word] ^ ref[j, word])
            if d < b0 or (d == b0 and j < i0):
                b1 = b0
                i1 = i0
                b0 = d
                i0 = j
            elif d < b1 or (d == b1 and j < i1):
                b1 = d
                i1 = j
        start += counts[i]
        if i0 >= 0:
            idx[i, 0] = i0
            dist[i, 0] = b0
        if k == 2 and i1 >= 0:
            idx[i, 1] = i1
            dist[i, 1] = b1
    return idx_arr, dist_arr
