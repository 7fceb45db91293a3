"""Dense float64 array helpers shared by all layers and optimizers.

Tensors are plain C-order numpy arrays of 64-bit reals.  Row-major layout
and a fixed left-to-right full-reduction order keep every computation
reproducible bit for bit.
"""
import numpy as np


class ShapeError(ValueError):
    """Raised when array shapes do not satisfy an operation's contract."""


def _check_shape(shape):
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0:
        raise ShapeError("shape must have at least one extent")
    for s in shape:
        if s < 1:
            raise ShapeError(f"shape extents must be >= 1, got {shape}")
    return shape


def zeros(shape):
    return np.zeros(_check_shape(shape), dtype=np.float64)


def ones(shape):
    return np.ones(_check_shape(shape), dtype=np.float64)


def from_values(shape, values):
    """Build a tensor from a flat iterable laid out in row-major order."""
    shape = _check_shape(shape)
    data = np.asarray(list(values), dtype=np.float64)
    if data.ndim != 1 or data.size != int(np.prod(shape)):
        raise ShapeError(
            f"got {data.size} values for shape {shape} "
            f"(need {int(np.prod(shape))})"
        )
    return data.reshape(shape)


def as_tensor(values):
    """Coerce nested lists/arrays to a C-contiguous float64 array."""
    return np.ascontiguousarray(values, dtype=np.float64)


def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


_EW_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
    "max": np.maximum,
}


def ew(op, a, b):
    """Elementwise op between equal-shape tensors or tensor and scalar."""
    if op not in _EW_OPS:
        raise ValueError(f"unknown elementwise op {op!r}")
    a = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    if b_arr.ndim != 0 and b_arr.shape != a.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b_arr.shape}")
    if op == "div" and np.any(b_arr == 0.0):
        raise ZeroDivisionError("elementwise division by zero")
    return _EW_OPS[op](a, b_arr)


def reduce(op, a, axis=None):
    """Reduce with sum/max/argmax semantics; argmax ties pick the lowest index.

    A full sum (axis=None) accumulates left to right over the flat row-major
    data, so it equals a sequential loop over ``a.ravel()`` exactly.
    """
    a = np.asarray(a, dtype=np.float64)
    if axis is not None and not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"axis {axis} out of range for rank-{a.ndim} tensor")
    if op == "sum":
        if axis is None:
            flat = a.ravel()
            if flat.size == 0:
                return 0.0
            return float(np.cumsum(flat)[-1])
        return np.sum(a, axis=axis)
    if op == "max":
        return np.max(a, axis=axis) if axis is not None else float(np.max(a))
    if op == "argmax":
        if axis is None:
            return int(np.argmax(a.ravel()))
        return np.argmax(a, axis=axis)
    raise ValueError(f"unknown reduction {op!r}")
