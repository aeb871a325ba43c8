"""Inner-loop kernels, compiled when available.

The Cython extension ``xbarsim._ext._kernels`` is used if it was built;
otherwise the numpy versions in :mod:`xbarsim._pykernels` are used. Set
``XBARSIM_PURE=1`` to force the numpy path.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("XBARSIM_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._ext import _kernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def im2col(x, kh, kw, stride=1, pad=0):
    return _impl.im2col(np.ascontiguousarray(x), kh, kw, stride, pad)


def col2im(col, shape, kh, kw, stride=1, pad=0):
    return _impl.col2im(np.ascontiguousarray(col), tuple(shape), kh, kw, stride, pad)


def dac_apply(codes, series, p_row, vdd):
    return _impl.dac_apply(np.ascontiguousarray(codes, dtype=np.int64),
                           np.ascontiguousarray(series, dtype=np.float64),
                           np.ascontiguousarray(p_row, dtype=np.float64), float(vdd))


def adc_diff(currents, offset, full_scale, bits):
    return _impl.adc_diff(np.ascontiguousarray(currents, dtype=np.float64),
                          float(offset), float(full_scale), int(bits))
