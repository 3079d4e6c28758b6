"""Vectorized numpy fallback for the conv2d kernel."""

from __future__ import annotations

import numpy as np


def conv2d_nchw(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    padding: int = 0,
) -> np.ndarray:
    """Strided cross-correlation on an (n, c, h, w) batch.

    weight is (out_c, in_c, kh, kw), bias (out_c,). Accumulates in float64,
    returns float32 (n, out_c, out_h, out_w).
    """
    x = np.asarray(x)
    weight = np.asarray(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError("conv2d expects 4-D input and weight")
    n, in_c, h, w = x.shape
    out_c, w_in_c, kh, kw = weight.shape
    if in_c != w_in_c:
        raise ValueError(f"input has {in_c} channels, weight expects {w_in_c}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ValueError("kernel larger than padded input")

    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    # (n, in_c, out_h_full, out_w_full, kh, kw) windows, then stride subsample
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    out = np.tensordot(
        windows.astype(np.float64), weight.astype(np.float64), axes=([1, 4, 5], [1, 2, 3])
    )
    out = out.transpose(0, 3, 1, 2)
    out += np.asarray(bias, dtype=np.float64)[None, :, None, None]
    return out.astype(np.float32)
