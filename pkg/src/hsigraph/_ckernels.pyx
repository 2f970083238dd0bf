# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the routines in ``_pykernels``; results must match bitwise."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()


def slic_iterate(image, double[:, ::1] centers, double step, double compactness, int n_iter):
    cdef double[:, ::1] img = np.ascontiguousarray(image, dtype=np.float64)
    cdef Py_ssize_t height = img.shape[0], width = img.shape[1]
    cdef Py_ssize_t K = centers.shape[0]
    labels_arr = -np.ones((height, width), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] labels = labels_arr
    cdef double[:, ::1] dist = np.empty((height, width), dtype=np.float64)
    cdef double[::1] sy = np.empty(K), sx = np.empty(K), sv = np.empty(K)
    cdef cnp.int64_t[::1] counts = np.empty(K, dtype=np.int64)
    cdef double ratio = (compactness / step) ** 2
    cdef double cy, cx, cv, dy, dx, dc, d
    cdef Py_ssize_t it, c, y, x, y0, y1, x0, x1
    cdef cnp.int64_t lab

    for it in range(n_iter):
        for y in range(height):
            for x in range(width):
                dist[y, x] = INFINITY
        for c in range(K):
            cy = centers[c, 0]
            cx = centers[c, 1]
            cv = centers[c, 2]
            y0 = max(0, <Py_ssize_t>floor(cy - step))
            y1 = min(height, <Py_ssize_t>ceil(cy + step) + 1)
            x0 = max(0, <Py_ssize_t>floor(cx - step))
            x1 = min(width, <Py_ssize_t>ceil(cx + step) + 1)
            for y in range(y0, y1):
                dy = <double>y - cy
                for x in range(x0, x1):
                    dx = <double>x - cx
                    dc = img[y, x] - cv
                    d = dc * dc + (dy * dy + dx * dx) * ratio
                    if d < dist[y, x]:
                        dist[y, x] = d
                        labels[y, x] = c
        for c in range(K):
            sy[c] = 0.0
            sx[c] = 0.0
            sv[c] = 0.0
            counts[c] = 0
        for y in range(height):
            for x in range(width):
                lab = labels[y, x]
                if lab >= 0:
                    counts[lab] += 1
                    sy[lab] += <double>y
                    sx[lab] += <double>x
                    sv[lab] += img[y, x]
        for c in range(K):
            if counts[c] > 0:
                centers[c, 0] = sy[c] / <double>counts[c]
                centers[c, 1] = sx[c] / <double>counts[c]
                centers[c, 2] = sv[c] / <double>counts[c]
    return labels_arr


def label_components(labels_in):
    cdef cnp.int64_t[:, ::1] labels = np.ascontiguousarray(labels_in, dtype=np.int64)
    cdef Py_ssize_t height = labels.shape[0], width = labels.shape[1]
    cdef Py_ssize_t n = height * width
    comp_arr = -np.ones((height, width), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] comp = comp_arr
    cdef cnp.int64_t[::1] stack = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t top, p, y, x, sy, sx
    cdef cnp.int64_t ncomp = 0, lab

    for sy in range(height):
        for sx in range(width):
            if comp[sy, sx] >= 0:
                continue
            lab = labels[sy, sx]
            comp[sy, sx] = ncomp
            stack[0] = sy * width + sx
            top = 1
            while top > 0:
                top -= 1
                p = stack[top]
                y = p // width
                x = p - y * width
                if y > 0 and comp[y - 1, x] < 0 and labels[y - 1, x] == lab:
                    comp[y - 1, x] = ncomp
                    stack[top] = p - width
                    top += 1
                if y + 1 < height and comp[y + 1, x] < 0 and labels[y + 1, x] == lab:
                    comp[y + 1, x] = ncomp
                    stack[top] = p + width
                    top += 1
                if x > 0 and comp[y, x - 1] < 0 and labels[y, x - 1] == lab:
                    comp[y, x - 1] = ncomp
                    stack[top] = p - 1
                    top += 1
                if x + 1 < width and comp[y, x + 1] < 0 and labels[y, x + 1] == lab:
                    comp[y, x + 1] = ncomp
                    stack[top] = p + 1
                    top += 1
            ncomp += 1
    return comp_arr, int(ncomp)


def knn_rows(Z_in, int k):
    cdef double[:, ::1] Z = np.ascontiguousarray(Z_in, dtype=np.float64)
    cdef Py_ssize_t N = Z.shape[0]
    idx_arr = np.empty((N, k), dtype=np.int64)
    w_arr = np.empty((N, k), dtype=np.float64)
    cdef cnp.int64_t[:, ::1] idx = idx_arr
    cdef double[:, ::1] w = w_arr
    cdef Py_ssize_t m = k + 1
    cdef double* bestz = <double*>malloc(m * sizeof(double))
    cdef Py_ssize_t* besti = <Py_ssize_t*>malloc(m * sizeof(Py_ssize_t))
    cdef Py_ssize_t i, j, filled, pos
    cdef double z, total, zk
    try:
        for i in range(N):
            filled = 0
            for j in range(N):
                if j == i:
                    continue
                z = Z[i, j]
                if filled == m and not (z < bestz[m - 1]):
                    continue
                # insertion keeps earlier columns ahead on ties
                if filled < m:
                    pos = filled
                    filled += 1
                else:
                    pos = m - 1
                while pos > 0 and z < bestz[pos - 1]:
                    bestz[pos] = bestz[pos - 1]
                    besti[pos] = besti[pos - 1]
                    pos -= 1
                bestz[pos] = z
                besti[pos] = j
            zk = bestz[k]
            total = zk - bestz[0]
            for j in range(1, k):
                total += zk - bestz[j]
            for j in range(k):
                idx[i, j] = besti[j]
                if total > 0:
                    w[i, j] = (zk - bestz[j]) / total
                else:
                    w[i, j] = 1.0 / k
    finally:
        free(bestz)
        free(besti)
    return idx_arr, w_arr


cdef void _insertion_sort_desc(double* u, Py_ssize_t n) nogil:
    cdef Py_ssize_t a, b
    cdef double t
    for a in range(1, n):
        t = u[a]
        b = a
        while b > 0 and u[b - 1] < t:
            u[b] = u[b - 1]
            b -= 1
        u[b] = t


def project_rows(indptr_in, values_in):
    cdef cnp.int64_t[::1] indptr = np.ascontiguousarray(indptr_in, dtype=np.int64)
    out_arr = np.array(values_in, dtype=np.float64, copy=True)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    cdef Py_ssize_t i, a, b, n, j, maxlen = 0
    cdef double css, t, theta, v
    for i in range(nrows):
        n = indptr[i + 1] - indptr[i]
        if n > maxlen:
            maxlen = n
    if maxlen == 0:
        return out_arr
    cdef double* u = <double*>malloc(maxlen * sizeof(double))
    try:
        for i in range(nrows):
            a = indptr[i]
            b = indptr[i + 1]
            n = b - a
            if n == 0:
                continue
            for j in range(n):
                u[j] = out[a + j]
            _insertion_sort_desc(u, n)
            css = 0.0
            theta = 0.0
            for j in range(n):
                css += u[j]
                t = (css - 1.0) / (j + 1)
                if u[j] - t > 0:
                    theta = t
            for j in range(n):
                v = out[a + j] - theta
                out[a + j] = v if v > 0.0 else 0.0
    finally:
        free(u)
    return out_arr
