"""Mixed-precision bit allocation driven by feature-map class separability.

The pipeline: dump per-layer feature maps to a ``.fmap`` container, score each
layer's class separability with a masked TF-IDF variant, turn scores into
layer importances, solve a budgeted linear program for per-layer weight
bit-widths, and simulate the resulting quantization on a small CNN.
"""

from sepquant.container import ContainerError, Tensor, read_container, write_container

__version__ = "0.1.0"

__all__ = [
    "ContainerError",
    "Tensor",
    "read_container",
    "write_container",
    "__version__",
]
