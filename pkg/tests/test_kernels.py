"""Compiled kernels agree with the numpy fallback."""

import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from xbarsim import _pykernels, kernels

compiled = pytest.importorskip("xbarsim._ext._kernels")


class TestAgreement:
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    @pytest.mark.parametrize("k,stride,pad", [(1, 1, 0), (3, 1, 1), (3, 2, 1), (2, 2, 0), (5, 1, 2)])
    def test_im2col_col2im(self, dtype, k, stride, pad):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((3, 2, 9, 8)).astype(dtype)
        a = _pykernels.im2col(x, k, k, stride, pad)
        np.testing.assert_array_equal(compiled.im2col(x, k, k, stride, pad), a)
        c = rng.standard_normal(a.shape).astype(dtype)
        np.testing.assert_allclose(compiled.col2im(c, x.shape, k, k, stride, pad),
                                   _pykernels.col2im(c, x.shape, k, k, stride, pad), rtol=1e-5, atol=1e-5)

    def test_dac_apply(self):
        rng = np.random.default_rng(1)
        codes = rng.integers(0, 64, (50, 16))
        series = np.r_[np.inf, np.sort(rng.random(63))[::-1] * 1e3]
        p_row = rng.uniform(10, 100, 16)
        np.testing.assert_allclose(compiled.dac_apply(codes, series, p_row, 0.2),
                                   _pykernels.dac_apply(codes, series, p_row, 0.2), rtol=1e-15)

    def test_adc_diff(self):
        rng = np.random.default_rng(2)
        cur = rng.standard_normal((40, 12)) * 1e-5
        np.testing.assert_array_equal(compiled.adc_diff(cur, -2e-5, 4e-5, 8),
                                      _pykernels.adc_diff(cur, -2e-5, 4e-5, 8))

    def test_adc_diff_matches_converter(self):
        from xbarsim import converters as cv
        cfg = cv.AdcConfig.bipolar(3e-5, 8)
        cur = np.random.default_rng(3).standard_normal((20, 8)) * 2e-5
        ref = cv.adc_reconstruct(cv.adc_convert(cur[:, 0::2] - cur[:, 1::2], cfg), cfg)
        np.testing.assert_allclose(kernels.adc_diff(cur, cfg.offset, cfg.i_full_scale, cfg.bits), ref,
                                   rtol=1e-12, atol=1e-20)


def test_backend_selection():
    assert kernels.BACKEND == "cython"
    env = dict(os.environ, XBARSIM_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import xbarsim.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    importlib.reload(kernels)
