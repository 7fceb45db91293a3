"""Pure-numpy kernel implementations (fallback backend).

Accumulation orders match rmdl.kernels._native loop for loop so both
backends produce bit-identical results.
"""
import numpy as np
from numpy.lib.stride_tricks import as_strided


def _out_extent(n, k, stride):
    return (n - k) // stride + 1


def im2col2d(x, k, stride):
    """(B,H,W,C) -> (B,OH,OW,k*k*C) patch matrix, window scanned row-major."""
    b, h, w, c = x.shape
    oh, ow = _out_extent(h, k, stride), _out_extent(w, k, stride)
    sb, sh, sw, sc = x.strides
    win = as_strided(x, (b, oh, ow, k, k, c), (sb, sh * stride, sw * stride, sh, sw, sc))
    return win.reshape(b, oh, ow, k * k * c)


def col2im2d(cols, b, h, w, c, k, stride):
    """Scatter-add patch gradients back onto the (B,H,W,C) input grid."""
    oh, ow = _out_extent(h, k, stride), _out_extent(w, k, stride)
    gx = np.zeros((b, h, w, c), dtype=np.float64)
    cols6 = cols.reshape(b, oh, ow, k, k, c)
    for ky in range(k):
        for kx in range(k):
            gx[:, ky:ky + oh * stride:stride, kx:kx + ow * stride:stride, :] += \
                cols6[:, :, :, ky, kx, :]
    return gx


def im2col1d(x, k, stride):
    """(B,L,C) -> (B,OL,k*C)."""
    b, l, c = x.shape
    ol = _out_extent(l, k, stride)
    sb, sl, sc = x.strides
    win = as_strided(x, (b, ol, k, c), (sb, sl * stride, sl, sc))
    return win.reshape(b, ol, k * c)


def col2im1d(cols, b, l, c, k, stride):
    ol = _out_extent(l, k, stride)
    gx = np.zeros((b, l, c), dtype=np.float64)
    cols4 = cols.reshape(b, ol, k, c)
    for kk in range(k):
        gx[:, kk:kk + ol * stride:stride, :] += cols4[:, :, kk, :]
    return gx


def maxpool2d_forward(x, k, stride):
    """Per-window max over (B,H,W,C); returns values and flat in-window argmax.

    Ties resolve to the first maximum in the window's row-major scan.
    """
    b, h, w, c = x.shape
    oh, ow = _out_extent(h, k, stride), _out_extent(w, k, stride)
    sb, sh, sw, sc = x.strides
    win = as_strided(x, (b, oh, ow, k, k, c), (sb, sh * stride, sw * stride, sh, sw, sc))
    flat = np.ascontiguousarray(win.transpose(0, 1, 2, 5, 3, 4)).reshape(b, oh, ow, c, k * k)
    idx = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return out, idx.astype(np.int64)


def maxpool2d_backward(gout, idx, b, h, w, c, k, stride):
    oh, ow = gout.shape[1], gout.shape[2]
    gx = np.zeros((b, h, w, c), dtype=np.float64)
    bi, ohi, owi, ci = np.indices((b, oh, ow, c), sparse=False)
    rows = ohi * stride + idx // k
    colz = owi * stride + idx % k
    np.add.at(gx, (bi, rows, colz, ci), gout)
    return gx


def maxpool1d_forward(x, k, stride):
    b, l, c = x.shape
    ol = _out_extent(l, k, stride)
    sb, sl, sc = x.strides
    win = as_strided(x, (b, ol, k, c), (sb, sl * stride, sl, sc))
    flat = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(b, ol, c, k)
    idx = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return out, idx.astype(np.int64)


def maxpool1d_backward(gout, idx, b, l, c, k, stride):
    ol = gout.shape[1]
    gx = np.zeros((b, l, c), dtype=np.float64)
    bi, oli, ci = np.indices((b, ol, c), sparse=False)
    np.add.at(gx, (bi, oli * stride + idx, ci), gout)
    return gx
