"""Benchmark the compiled kernels against the pure-numpy fallback.

Run as ``python -m rmdl.bench``.  Times the conv/pool hot loops on both
backends over realistic shapes and verifies they agree bit for bit.
"""
import time

import numpy as np

from .kernels import _numpy as py

try:
    from .kernels import _native as native
except ImportError:
    native = None


def _time(fn, *args, repeat=5):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _report(name, py_fn, nat_fn, args, pick=lambda r: r):
    t_py, r_py = _time(py_fn, *args)
    line = f"{name:<22} python {t_py * 1e3:8.2f} ms"
    if nat_fn is not None:
        t_nat, r_nat = _time(nat_fn, *args)
        same = np.array_equal(np.asarray(pick(r_py)), np.asarray(pick(r_nat)))
        line += (f"   native {t_nat * 1e3:8.2f} ms   "
                 f"speedup {t_py / t_nat:5.2f}x   bit-identical: {same}")
    print(line)


def main():
    rng = np.random.default_rng(0)
    x4 = np.ascontiguousarray(rng.standard_normal((32, 28, 28, 8)))
    cols4 = np.ascontiguousarray(py.im2col2d(x4, 5, 1))
    x3 = np.ascontiguousarray(rng.standard_normal((32, 64, 50)))
    # the backward pass hands col2im a fresh matmul result, so benchmark
    # it on a contiguous array, not the forward view
    cols3 = np.ascontiguousarray(py.im2col1d(x3, 5, 1))

    if native is None:
        print("native backend not built; timing python fallback only")

    def n(name):
        return getattr(native, name) if native is not None else None

    _report("im2col2d", py.im2col2d, n("im2col2d"), (x4, 5, 1))
    _report("col2im2d", py.col2im2d, n("col2im2d"),
            (cols4, 32, 28, 28, 8, 5, 1))
    _report("maxpool2d_forward", py.maxpool2d_forward, n("maxpool2d_forward"),
            (x4, 2, 2), pick=lambda r: r[0])
    _report("im2col1d", py.im2col1d, n("im2col1d"), (x3, 5, 1))
    _report("col2im1d", py.col2im1d, n("col2im1d"), (cols3, 32, 64, 50, 5, 1))
    _report("maxpool1d_forward", py.maxpool1d_forward, n("maxpool1d_forward"),
            (x3, 2, 2), pick=lambda r: r[0])


if __name__ == "__main__":
    main()
