"""Pure numpy implementations of the inner kernels (reference and fallback)."""

import numpy as np


def im2col(x, kh, kw, stride=1, pad=0):
    """(N, C, H, W) -> (N*oh*ow, C*kh*kw); column order is (c, ky, kx)."""
    n, c, h, w = x.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    img = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    col = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for y in range(kh):
        ym = y + stride * oh
        for xx in range(kw):
            xm = xx + stride * ow
            col[:, :, y, xx] = img[:, :, y:ym:stride, xx:xm:stride]
    return col.transpose(0, 4, 5, 1, 2, 3).reshape(n * oh * ow, -1)


def col2im(col, shape, kh, kw, stride=1, pad=0):
    """Adjoint of :func:`im2col` (overlapping patches are summed)."""
    n, c, h, w = shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    col = col.reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    img = np.zeros((n, c, h + 2 * pad + stride - 1, w + 2 * pad + stride - 1), dtype=col.dtype)
    for y in range(kh):
        ym = y + stride * oh
        for xx in range(kw):
            xm = xx + stride * ow
            img[:, :, y:ym:stride, xx:xm:stride] += col[:, :, y, xx]
    return img[:, :, pad:pad + h, pad:pad + w]


def dac_apply(codes, series, p_row, vdd):
    """Divider output ``vdd * p / (series[code] + p)`` per (vector, row)."""
    s = series[codes]
    with np.errstate(invalid="ignore"):
        out = vdd * p_row / (s + p_row)
    return np.where(np.isinf(s), 0.0, out)


def adc_diff(currents, offset, full_scale, bits):
    """Differential pairs (even minus odd column), quantized and reconstructed."""
    top = (1 << bits) - 1
    d = currents[:, 0::2] - currents[:, 1::2]
    x = (d - offset) / full_scale * top
    code = np.clip(np.sign(x) * np.floor(np.abs(x) + 0.5), 0, top)
    return offset + code * (full_scale / top)
