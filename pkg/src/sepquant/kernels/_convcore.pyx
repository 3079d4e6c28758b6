# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled conv2d kernel: straight loops with float64 accumulators."""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()


def conv2d_nchw(x, weight, bias, int stride=1, int padding=0):
    """Strided cross-correlation on an (n, c, h, w) batch.

    Mirrors the numpy fallback: float64 accumulation, float32 output.
    """
    x_arr = np.ascontiguousarray(x, dtype=np.float32)
    w_arr = np.ascontiguousarray(weight, dtype=np.float32)
    b_arr = np.ascontiguousarray(bias, dtype=np.float32)
    if x_arr.ndim != 4 or w_arr.ndim != 4:
        raise ValueError("conv2d expects 4-D input and weight")
    if x_arr.shape[1] != w_arr.shape[1]:
        raise ValueError(
            f"input has {x_arr.shape[1]} channels, weight expects {w_arr.shape[1]}"
        )
    if x_arr.shape[2] + 2 * padding < w_arr.shape[2] or x_arr.shape[3] + 2 * padding < w_arr.shape[3]:
        raise ValueError("kernel larger than padded input")
    if padding:
        x_arr = np.pad(x_arr, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

    cdef const cnp.float32_t[:, :, :, ::1] xv = x_arr
    cdef const cnp.float32_t[:, :, :, ::1] wv = w_arr
    cdef const cnp.float32_t[::1] bv = b_arr

    cdef Py_ssize_t n = xv.shape[0], in_c = xv.shape[1], h = xv.shape[2], w = xv.shape[3]
    cdef Py_ssize_t out_c = wv.shape[0], kh = wv.shape[2], kw = wv.shape[3]
    cdef Py_ssize_t out_h = (h - kh) // stride + 1
    cdef Py_ssize_t out_w = (w - kw) // stride + 1

    out_arr = np.empty((n, out_c, out_h, out_w), dtype=np.float32)
    cdef cnp.float32_t[:, :, :, ::1] ov = out_arr

    cdef Py_ssize_t b, oc, ic, oy, ox, ky, kx, iy
    cdef double acc

    with nogil:
        for b in range(n):
            for oc in range(out_c):
                for oy in range(out_h):
                    for ox in range(out_w):
                        acc = bv[oc]
                        for ic in range(in_c):
                            for ky in range(kh):
                                iy = oy * stride + ky
                                for kx in range(kw):
                                    acc += (
                                        <double>xv[b, ic, iy, ox * stride + kx]
                                        * <double>wv[oc, ic, ky, kx]
                                    )
                        ov[b, oc, oy, ox] = <cnp.float32_t>acc
    return out_arr
