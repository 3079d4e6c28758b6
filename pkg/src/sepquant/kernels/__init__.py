"""Convolution kernel dispatch.

The conv2d inner loop dominates pipeline runtime, so it ships as a compiled
Cython extension with a vectorized numpy fallback. Selection happens once at
import: the extension when built, else numpy. Set SEPQUANT_FORCE_NUMPY=1 to
force the fallback (used by the kernel benchmark and parity tests).

Both implementations accumulate in float64 and emit float32, so they agree to
float32 rounding.
"""

from __future__ import annotations

import os

from sepquant.kernels.numpy_ref import conv2d_nchw as _numpy_conv2d

if os.environ.get("SEPQUANT_FORCE_NUMPY", "0") not in ("0", ""):
    conv2d_nchw = _numpy_conv2d
    BACKEND = "numpy"
else:
    try:
        from sepquant.kernels._convcore import conv2d_nchw  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        conv2d_nchw = _numpy_conv2d
        BACKEND = "numpy"

__all__ = ["conv2d_nchw", "BACKEND"]
