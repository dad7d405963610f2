# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels; signatures mirror kernels._fallback exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, floor

cnp.import_array()

cdef double _DIVISOR_FLOOR = 1e-8


def warp_bilinear(const double[:, ::1] src, const double[:, ::1] m, int out_h, int out_w):
    cdef int h = src.shape[0]
    cdef int w = src.shape[1]
    out_arr = np.zeros((out_h, out_w), dtype=np.float64)
    mask_arr = np.zeros((out_h, out_w), dtype=bool)
    cdef double[:, ::1] out = out_arr
    cdef cnp.uint8_t[:, ::1] mask = mask_arr.view(np.uint8)
    cdef int x, y, x0, y0
    cdef double wd, sx, sy, fx, fy, i00, i01, i10, i11, top, bot
    cdef double m00 = m[0, 0], m01 = m[0, 1], m02 = m[0, 2]
    cdef double m10 = m[1, 0], m11 = m[1, 1], m12 = m[1, 2]
    cdef double m20 = m[2, 0], m21 = m[2, 1], m22 = m[2, 2]
    for y in range(out_h):
        for x in range(out_w):
            wd = m20 * x + m21 * y + m22
            if fabs(wd) < _DIVISOR_FLOOR:
                continue
            sx = (m00 * x + m01 * y + m02) / wd
            sy = (m10 * x + m11 * y + m12) / wd
            if sx < 0.0 or sx > w - 1.0 or sy < 0.0 or sy > h - 1.0:
                continue
            x0 = <int>floor(sx)
            if x0 > w - 2:
                x0 = w - 2
            y0 = <int>floor(sy)
            if y0 > h - 2:
                y0 = h - 2
            fx = sx - x0
            fy = sy - y0
            i00 = src[y0, x0]
            i01 = src[y0, x0 + 1]
            i10 = src[y0 + 1, x0]
            i11 = src[y0 + 1, x0 + 1]
            top = i00 * (1.0 - fx) + i01 * fx
            bot = i10 * (1.0 - fx) + i11 * fx
            out[y, x] = top * (1.0 - fy) + bot * fy
            mask[y, x] = 1
    return out_arr, mask_arr


def sample_points(const double[:, ::1] img, xs_in, ys_in):
    xs_arr = np.ascontiguousarray(xs_in, dtype=np.float64)
    ys_arr = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef double[::1] xs = xs_arr
    cdef double[::1] ys = ys_arr
    cdef Py_ssize_t n = xs.shape[0]
    cdef int h = img.shape[0]
    cdef int w = img.shape[1]
    vals_arr = np.zeros(n, dtype=np.float64)
    gx_arr = np.zeros(n, dtype=np.float64)
    gy_arr = np.zeros(n, dtype=np.float64)
    ok_arr = np.zeros(n, dtype=bool)
    cdef double[::1] vals = vals_arr
    cdef double[::1] gx = gx_arr
    cdef double[::1] gy = gy_arr
    cdef cnp.uint8_t[::1] ok = ok_arr.view(np.uint8)
    cdef Py_ssize_t i
    cdef int x0, y0
    cdef double x, y, fx, fy, i00, i01, i10, i11, top, bot
    for i in range(n):
        x = xs[i]
        y = ys[i]
        if x < 0.0 or x > w - 1.0 or y < 0.0 or y > h - 1.0:
            continue
        x0 = <int>floor(x)
        if x0 > w - 2:
            x0 = w - 2
        y0 = <int>floor(y)
        if y0 > h - 2:
            y0 = h - 2
        fx = x - x0
        fy = y - y0
        i00 = img[y0, x0]
        i01 = img[y0, x0 + 1]
        i10 = img[y0 + 1, x0]
        i11 = img[y0 + 1, x0 + 1]
        top = i00 * (1.0 - fx) + i01 * fx
        bot = i10 * (1.0 - fx) + i11 * fx
        vals[i] = top * (1.0 - fy) + bot * fy
        gx[i] = (i01 - i00) + fy * ((i11 - i10) - (i01 - i00))
        gy[i] = (i10 - i00) + fx * ((i11 - i01) - (i10 - i00))
        ok[i] = 1
    return vals_arr, gx_arr, gy_arr, ok_arr


def joint_hist(const double[:, ::1] a, const double[:, ::1] b, mask_in, int bins):
    mask_arr = np.ascontiguousarray(mask_in, dtype=bool)
    cdef const cnp.uint8_t[:, ::1] mask = mask_arr.view(np.uint8)
    counts_arr = np.zeros((bins, bins), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    cdef int h = a.shape[0]
    cdef int w = a.shape[1]
    cdef int x, y, ia, ib
    cdef double s = bins / 256.0
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            ia = <int>(a[y, x] * s)
            if ia < 0:
                ia = 0
            elif ia > bins - 1:
                ia = bins - 1
            ib = <int>(b[y, x] * s)
            if ib < 0:
                ib = 0
            elif ib > bins - 1:
                ib = bins - 1
            counts[ia, ib] += 1
    return counts_arr


def emma_gradient(u_b_in, v_b_in, jac_b_in, u_a_in, v_a_in, jac_a_in,
                  double sigma):
    cdef const double[::1] u_b = np.ascontiguousarray(u_b_in, dtype=np.float64)
    cdef const double[::1] v_b = np.ascontiguousarray(v_b_in, dtype=np.float64)
    cdef const double[:, ::1] jac_b = np.ascontiguousarray(jac_b_in, dtype=np.float64)
    cdef const double[::1] u_a = np.ascontiguousarray(u_a_in, dtype=np.float64)
    cdef const double[::1] v_a = np.ascontiguousarray(v_a_in, dtype=np.float64)
    cdef const double[:, ::1] jac_a = np.ascontiguousarray(jac_a_in, dtype=np.float64)
    cdef Py_ssize_t nb = v_b.shape[0]
    cdef Py_ssize_t na = v_a.shape[0]
    cdef double inv2s2 = 1.0 / (2.0 * sigma * sigma)
    cdef double invs2 = 1.0 / (sigma * sigma)

    kv_arr = np.empty((nb, na), dtype=np.float64)
    kuv_arr = np.empty((nb, na), dtype=np.float64)
    cdef double[:, ::1] kv = kv_arr
    cdef double[:, ::1] kuv = kuv_arr
    rowv_arr = np.zeros(nb, dtype=np.float64)
    rowuv_arr = np.zeros(nb, dtype=np.float64)
    cdef double[::1] rowv = rowv_arr
    cdef double[::1] rowuv = rowuv_arr
    csum_a_arr = np.zeros(na, dtype=np.float64)
    cdef double[::1] csum_a = csum_a_arr
    g_arr = np.zeros(8, dtype=np.float64)
    cdef double[::1] g = g_arr

    cdef Py_ssize_t i, j, k
    cdef double dv, du, e1, e2, c, ci
    for i in range(nb):
        for j in range(na):
            dv = v_b[i] - v_a[j]
            du = u_b[i] - u_a[j]
            e1 = exp(-dv * dv * inv2s2)
            e2 = e1 * exp(-du * du * inv2s2)
            kv[i, j] = e1
            kuv[i, j] = e2
            rowv[i] += e1
            rowuv[i] += e2
    for i in range(nb):
        ci = 0.0
        for j in range(na):
            dv = v_b[i] - v_a[j]
            c = dv * (kv[i, j] / rowv[i] - kuv[i, j] / rowuv[i]) * invs2
            ci += c
            csum_a[j] += c
        for k in range(8):
            g[k] += ci * jac_b[i, k]
    for j in range(na):
        for k in range(8):
            g[k] -= csum_a[j] * jac_a[j, k]
    for k in range(8):
        g[k] /= nb
    return g_arr
