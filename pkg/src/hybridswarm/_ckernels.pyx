# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled geometry kernels.

Every function here has a numpy twin in ``_pykernels`` and must return
bit-identical results; ``tests/test_kernels.py`` enforces this.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()


def within_radius(const double[:, ::1] a, const double[:, ::1] b, double r):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef double r2 = r * r, dx, dy
    out = np.zeros((n, m), dtype=np.bool_)
    cdef cnp.npy_bool[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            if dx * dx + dy * dy <= r2:
                o[i, j] = 1
    return out


def pairs_within(const double[:, ::1] p, double r):
    cdef Py_ssize_t n = p.shape[0], i, j, k = 0
    cdef double r2 = r * r, dx, dy
    buf = np.empty((n * (n - 1) // 2 if n > 1 else 0, 2), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] b = buf
    for i in range(n):
        for j in range(i + 1, n):
            dx = p[i, 0] - p[j, 0]
            dy = p[i, 1] - p[j, 1]
            if dx * dx + dy * dy <= r2:
                b[k, 0] = i
                b[k, 1] = j
                k += 1
    return buf[:k]


def count_within(const double[:, ::1] points, const double[:, ::1] centers, double r):
    cdef Py_ssize_t g = points.shape[0], m = centers.shape[0], i, j
    cdef double r2 = r * r, dx, dy
    cdef cnp.int64_t c
    out = np.zeros(g, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    for i in range(g):
        c = 0
        for j in range(m):
            dx = points[i, 0] - centers[j, 0]
            dy = points[i, 1] - centers[j, 1]
            if dx * dx + dy * dy <= r2:
                c += 1
        o[i] = c
    return out


def annulus_mask(const double[:, ::1] points, const double[:, ::1] anchors,
                 double d_min, double r_max):
    cdef Py_ssize_t g = points.shape[0], m = anchors.shape[0], i, j
    cdef double lo2 = d_min * d_min, hi2 = r_max * r_max, dx, dy, d2
    cdef bint near, clear
    out = np.zeros(g, dtype=np.bool_)
    cdef cnp.npy_bool[::1] o = out
    for i in range(g):
        near = False
        clear = True
        for j in range(m):
            dx = points[i, 0] - anchors[j, 0]
            dy = points[i, 1] - anchors[j, 1]
            d2 = dx * dx + dy * dy
            if d2 < lo2:
                clear = False
                break
            if d2 <= hi2:
                near = True
        if near and clear:
            o[i] = 1
    return out


def union_cells(const double[:, ::1] centers, double r, double width,
                double height, double res):
    cdef Py_ssize_t nx = <Py_ssize_t>(width / res + 0.5)
    cdef Py_ssize_t ny = <Py_ssize_t>(height / res + 0.5)
    cdef Py_ssize_t m = centers.shape[0], k, i, j, i0, i1, j0, j1
    cdef double r2 = r * r, cx, cy, dx, dy
    cdef cnp.int64_t total = 0
    if m == 0 or nx <= 0 or ny <= 0:
        return 0
    grid = np.zeros((nx, ny), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] gr = grid
    for k in range(m):
        cx = centers[k, 0]
        cy = centers[k, 1]
        i0 = <Py_ssize_t>ceil((cx - r) / res - 0.5)
        i1 = <Py_ssize_t>floor((cx + r) / res - 0.5)
        j0 = <Py_ssize_t>ceil((cy - r) / res - 0.5)
        j1 = <Py_ssize_t>floor((cy + r) / res - 0.5)
        if i0 < 0:
            i0 = 0
        if j0 < 0:
            j0 = 0
        if i1 > nx - 1:
            i1 = nx - 1
        if j1 > ny - 1:
            j1 = ny - 1
        for i in range(i0, i1 + 1):
            dx = (i + 0.5) * res - cx
            for j in range(j0, j1 + 1):
                if gr[i, j]:
                    continue
                dy = (j + 0.5) * res - cy
                if dx * dx + dy * dy <= r2:
                    gr[i, j] = 1
                    total += 1
    return total
