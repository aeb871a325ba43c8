"""Compare the compiled kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import timeit

import numpy as np

from xbarsim import _pykernels

try:
    from xbarsim._ext import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def cases(rng):
    x = rng.standard_normal((64, 16, 16, 16)).astype(np.float32)
    cols = _pykernels.im2col(x, 3, 3, 1, 1)
    codes = rng.integers(0, 64, (4096, 64))
    series = np.r_[np.inf, np.linspace(1e4, 10, 63)]
    p_row = rng.uniform(10, 100, 64)
    cur = rng.standard_normal((4096, 64)) * 1e-5
    return {
        "im2col 64x16x16x16 k3": lambda k: k.im2col(x, 3, 3, 1, 1),
        "col2im 64x16x16x16 k3": lambda k: k.col2im(cols, x.shape, 3, 3, 1, 1),
        "dac_apply 4096x64": lambda k: k.dac_apply(codes, series, p_row, 0.2),
        "adc_diff 4096x64": lambda k: k.adc_diff(cur, -2e-5, 4e-5, 8),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:<26}{t_py:>12.3f}{'n/a':>12}{'':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26}{t_py:>12.3f}{t_cy:>12.3f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
