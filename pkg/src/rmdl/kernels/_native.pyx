# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the convolution/pooling hot loops.

Loop nests are ordered to accumulate in exactly the same element order as
rmdl.kernels._numpy, so the two backends agree bit for bit.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def im2col2d(cnp.float64_t[:, :, :, ::1] x, int k, int stride):
    cdef Py_ssize_t b = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t oh = (h - k) // stride + 1, ow = (w - k) // stride + 1
    out_arr = np.empty((b, oh, ow, k * k * c), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, oy, ox, ky, kx, ch, base
    with nogil:
        for i in range(b):
            for oy in range(oh):
                for ox in range(ow):
                    base = 0
                    for ky in range(k):
                        for kx in range(k):
                            for ch in range(c):
                                out[i, oy, ox, base + ch] = \
                                    x[i, oy * stride + ky, ox * stride + kx, ch]
                            base += c
    return out_arr


def col2im2d(cnp.float64_t[:, :, :, ::1] cols, Py_ssize_t b, Py_ssize_t h,
             Py_ssize_t w, Py_ssize_t c, int k, int stride):
    cdef Py_ssize_t oh = (h - k) // stride + 1, ow = (w - k) // stride + 1
    gx_arr = np.zeros((b, h, w, c), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t i, oy, ox, ky, kx, ch, off
    with nogil:
        # (ky, kx) outermost: same per-element addition order as the fallback
        for ky in range(k):
            for kx in range(k):
                off = (ky * k + kx) * c
                for i in range(b):
                    for oy in range(oh):
                        for ox in range(ow):
                            for ch in range(c):
                                gx[i, oy * stride + ky, ox * stride + kx, ch] += \
                                    cols[i, oy, ox, off + ch]
    return gx_arr


def im2col1d(cnp.float64_t[:, :, ::1] x, int k, int stride):
    cdef Py_ssize_t b = x.shape[0], l = x.shape[1], c = x.shape[2]
    cdef Py_ssize_t ol = (l - k) // stride + 1
    out_arr = np.empty((b, ol, k * c), dtype=np.float64)
    cdef cnp.float64_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, op, kk, ch, base
    with nogil:
        for i in range(b):
            for op in range(ol):
                base = 0
                for kk in range(k):
                    for ch in range(c):
                        out[i, op, base + ch] = x[i, op * stride + kk, ch]
                    base += c
    return out_arr


def col2im1d(cnp.float64_t[:, :, ::1] cols, Py_ssize_t b, Py_ssize_t l,
             Py_ssize_t c, int k, int stride):
    cdef Py_ssize_t ol = (l - k) // stride + 1
    gx_arr = np.zeros((b, l, c), dtype=np.float64)
    cdef cnp.float64_t[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t i, op, kk, ch
    with nogil:
        for kk in range(k):
            for i in range(b):
                for op in range(ol):
                    for ch in range(c):
                        gx[i, op * stride + kk, ch] += cols[i, op, kk * c + ch]
    return gx_arr


def maxpool2d_forward(cnp.float64_t[:, :, :, ::1] x, int k, int stride):
    cdef Py_ssize_t b = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t oh = (h - k) // stride + 1, ow = (w - k) // stride + 1
    out_arr = np.empty((b, oh, ow, c), dtype=np.float64)
    idx_arr = np.empty((b, oh, ow, c), dtype=np.int64)
    cdef cnp.float64_t[:, :, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t i, oy, ox, ky, kx, ch, best
    cdef double v, m
    with nogil:
        for i in range(b):
            for oy in range(oh):
                for ox in range(ow):
                    for ch in range(c):
                        m = x[i, oy * stride, ox * stride, ch]
                        best = 0
                        for ky in range(k):
                            for kx in range(k):
                                v = x[i, oy * stride + ky, ox * stride + kx, ch]
                                if v > m:
                                    m = v
                                    best = ky * k + kx
                        out[i, oy, ox, ch] = m
                        idx[i, oy, ox, ch] = best
    return out_arr, idx_arr


def maxpool2d_backward(cnp.float64_t[:, :, :, ::1] gout, cnp.int64_t[:, :, :, ::1] idx,
                       Py_ssize_t b, Py_ssize_t h, Py_ssize_t w, Py_ssize_t c,
                       int k, int stride):
    gx_arr = np.zeros((b, h, w, c), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t i, oy, ox, ch, p
    cdef Py_ssize_t oh = gout.shape[1], ow = gout.shape[2]
    with nogil:
        for i in range(b):
            for oy in range(oh):
                for ox in range(ow):
                    for ch in range(c):
                        p = idx[i, oy, ox, ch]
                        gx[i, oy * stride + p // k, ox * stride + p % k, ch] += \
                            gout[i, oy, ox, ch]
    return gx_arr


def maxpool1d_forward(cnp.float64_t[:, :, ::1] x, int k, int stride):
    cdef Py_ssize_t b = x.shape[0], l = x.shape[1], c = x.shape[2]
    cdef Py_ssize_t ol = (l - k) // stride + 1
    out_arr = np.empty((b, ol, c), dtype=np.float64)
    idx_arr = np.empty((b, ol, c), dtype=np.int64)
    cdef cnp.float64_t[:, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, ::1] idx = idx_arr
    cdef Py_ssize_t i, op, kk, ch, best
    cdef double v, m
    with nogil:
        for i in range(b):
            for op in range(ol):
                for ch in range(c):
                    m = x[i, op * stride, ch]
                    best = 0
                    for kk in range(k):
                        v = x[i, op * stride + kk, ch]
                        if v > m:
                            m = v
                            best = kk
                    out[i, op, ch] = m
                    idx[i, op, ch] = best
    return out_arr, idx_arr


def maxpool1d_backward(cnp.float64_t[:, :, ::1] gout, cnp.int64_t[:, :, ::1] idx,
                       Py_ssize_t b, Py_ssize_t l, Py_ssize_t c, int k, int stride):
    gx_arr = np.zeros((b, l, c), dtype=np.float64)
    cdef cnp.float64_t[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t i, op, ch
    cdef Py_ssize_t ol = gout.shape[1]
    with nogil:
        for i in range(b):
            for op in range(ol):
                for ch in range(c):
                    gx[i, op * stride + idx[i, op, ch], ch] += gout[i, op, ch]
    return gx_arr
