"""Symmetric uniform fake quantization of weight tensors.

Per-tensor, restricted-range scheme: scale = max|w| / (2^(bits-1) - 1), codes
clamped to [-(2^(bits-1)-1), 2^(bits-1)-1], rounding half away from zero.
Arithmetic runs in float64; the dequantized tensor is reconstructed as
(q / qmax) * max|w| so the extreme entries come back bit-exact, which makes
the quantizer idempotent on its own output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_BITS = 2
MAX_BITS = 8


@dataclass(frozen=True)
class QuantizedTensor:
    q: np.ndarray  # int32 codes, same shape as the source tensor
    scale: float
    bits: int


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def quantize_dequantize(weights: np.ndarray, bits: int) -> tuple[np.ndarray, QuantizedTensor]:
    """Fake-quantize a tensor, returning (dequantized float64 array, codes).

    An all-zero tensor gets scale 1.0 and all-zero codes.
    """
    if not MIN_BITS <= bits <= MAX_BITS:
        raise ValueError(f"bits must be in [{MIN_BITS}, {MAX_BITS}], got {bits}")
    w = np.asarray(weights, dtype=np.float64)
    qmax = (1 << (bits - 1)) - 1
    amax = float(np.max(np.abs(w))) if w.size else 0.0
    if amax == 0.0:
        q = np.zeros(w.shape, dtype=np.int32)
        return np.zeros(w.shape, dtype=np.float64), QuantizedTensor(q=q, scale=1.0, bits=bits)
    scale = amax / qmax
    q = np.clip(_round_half_away(w / scale), -qmax, qmax).astype(np.int32)
    dequantized = (q / qmax) * amax
    return dequantized, QuantizedTensor(q=q, scale=scale, bits=bits)


def layer_mse(original: np.ndarray, dequantized: np.ndarray) -> float:
    """Mean squared elementwise difference between two same-shape tensors."""
    a = np.asarray(original, dtype=np.float64)
    b = np.asarray(dequantized, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))
