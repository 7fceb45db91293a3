"""Convolution/pooling kernels with backend selection at import time.

The compiled Cython backend is used when available; otherwise a pure-numpy
fallback with identical numerics takes over.  Set RMDL_KERNELS=python or
RMDL_KERNELS=native to force a backend.
"""
import os

_choice = os.environ.get("RMDL_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "native", "python"):
    raise ValueError(f"RMDL_KERNELS must be auto, native or python, not {_choice!r}")

if _choice == "python":
    from . import _numpy as _impl
    BACKEND = "python"
else:
    try:
        from . import _native as _impl
        BACKEND = "native"
    except ImportError:
        if _choice == "native":
            raise
        from . import _numpy as _impl
        BACKEND = "python"

im2col2d = _impl.im2col2d
col2im2d = _impl.col2im2d
im2col1d = _impl.im2col1d
col2im1d = _impl.col2im1d
maxpool2d_forward = _impl.maxpool2d_forward
maxpool2d_backward = _impl.maxpool2d_backward
maxpool1d_forward = _impl.maxpool1d_forward
maxpool1d_backward = _impl.maxpool1d_backward


def backend_name():
    return BACKEND
