"""Benchmark the compiled conv kernel against the numpy fallback.

Run:  PYTHONPATH=src python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from sepquant.kernels import numpy_ref

try:
    from sepquant.kernels import _convcore
except ImportError:
    _convcore = None

WORKLOADS = [
    # (batch, in_c, h, w, out_c, k, stride, padding)
    ("fixture conv1", (32, 1, 8, 8, 8, 3, 1, 1)),
    ("fixture conv4", (32, 16, 4, 4, 16, 3, 1, 1)),
    ("wide 16x16", (16, 32, 16, 16, 32, 3, 1, 1)),
    ("deep 32x32", (8, 64, 32, 32, 64, 3, 1, 1)),
]


def bench(fn, x, w, b, stride, padding, repeats=5):
    fn(x, w, b, stride, padding)  # warmup
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(x, w, b, stride, padding)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"{'workload':<14} {'numpy (ms)':>12} {'cython (ms)':>12} {'speedup':>9}")
    for name, (n, in_c, h, wd, out_c, k, stride, padding) in WORKLOADS:
        x = rng.normal(size=(n, in_c, h, wd)).astype(np.float32)
        w = rng.normal(size=(out_c, in_c, k, k)).astype(np.float32)
        b = rng.normal(size=out_c).astype(np.float32)
        t_numpy = bench(numpy_ref.conv2d_nchw, x, w, b, stride, padding)
        if _convcore is None:
            print(f"{name:<14} {t_numpy * 1e3:>12.3f} {'not built':>12} {'-':>9}")
            continue
        t_cython = bench(_convcore.conv2d_nchw, x, w, b, stride, padding)
        np.testing.assert_allclose(
            numpy_ref.conv2d_nchw(x, w, b, stride, padding),
            _convcore.conv2d_nchw(x, w, b, stride, padding),
            rtol=1e-6,
            atol=1e-6,
        )
        print(
            f"{name:<14} {t_numpy * 1e3:>12.3f} {t_cython * 1e3:>12.3f}"
            f" {t_numpy / t_cython:>8.2f}x"
        )


if __name__ == "__main__":
    main()
