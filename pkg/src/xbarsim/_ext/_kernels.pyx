# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``xbarsim._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, isinf

cnp.import_array()

ctypedef fused real_t:
    float
    double


def im2col(real_t[:, :, :, ::1] x, int kh, int kw, int stride=1, int pad=0):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - kw) // stride + 1
    dtype = np.float32 if real_t is float else np.float64
    out = np.zeros((n * oh * ow, c * kh * kw), dtype=dtype)
    cdef real_t[:, ::1] col = out
    cdef Py_ssize_t b, oy, ox, ch, ky, kx, iy, ix, r, k
    with nogil:
        for b in range(n):
            for oy in range(oh):
                for ox in range(ow):
                    r = (b * oh + oy) * ow + ox
                    k = 0
                    for ch in range(c):
                        for ky in range(kh):
                            iy = oy * stride + ky - pad
                            for kx in range(kw):
                                ix = ox * stride + kx - pad
                                if 0 <= iy < h and 0 <= ix < w:
                                    col[r, k] = x[b, ch, iy, ix]
                                k = k + 1
    return out


def col2im(real_t[:, ::1] col, shape, int kh, int kw, int stride=1, int pad=0):
    cdef Py_ssize_t n = shape[0], c = shape[1], h = shape[2], w = shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - kw) // stride + 1
    dtype = np.float32 if real_t is float else np.float64
    out = np.zeros((n, c, h, w), dtype=dtype)
    cdef real_t[:, :, :, ::1] img = out
    cdef Py_ssize_t b, oy, ox, ch, ky, kx, iy, ix, r, k
    with nogil:
        for b in range(n):
            for oy in range(oh):
                for ox in range(ow):
                    r = (b * oh + oy) * ow + ox
                    k = 0
                    for ch in range(c):
                        for ky in range(kh):
                            iy = oy * stride + ky - pad
                            for kx in range(kw):
                                ix = ox * stride + kx - pad
                                if 0 <= iy < h and 0 <= ix < w:
                                    img[b, ch, iy, ix] += col[r, k]
                                k = k + 1
    return out


def dac_apply(cnp.int64_t[:, ::1] codes, double[::1] series, double[::1] p_row, double vdd):
    cdef Py_ssize_t n = codes.shape[0], m = codes.shape[1], i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] v = out
    cdef double s
    with nogil:
        for i in range(n):
            for j in range(m):
                s = series[codes[i, j]]
                if isinf(s):
                    v[i, j] = 0.0
                else:
                    v[i, j] = vdd * p_row[j] / (s + p_row[j])
    return out


def adc_diff(double[:, ::1] currents, double offset, double full_scale, int bits):
    cdef Py_ssize_t n = currents.shape[0], k = currents.shape[1] // 2, i, j
    cdef double top = <double>((1 << bits) - 1)
    cdef double lsb = full_scale / top
    cdef double x, q
    out = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(k):
                x = (currents[i, 2 * j] - currents[i, 2 * j + 1] - offset) / full_scale * top
                if x >= 0:
                    q = floor(x + 0.5)
                else:
                    q = -floor(-x + 0.5)
                if q < 0:
                    q = 0
                elif q > top:
                    q = top
                o[i, j] = offset + q * lsb
    return out
