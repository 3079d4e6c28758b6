"""Minimal CNN inference: a layer graph loaded from a structured-text model
file plus a weight container, a deterministic forward pass, and quantized
evaluation producing the accuracy/size/BOPs report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sepquant import container
from sepquant.allocator import LayerProfile, bops, model_size
from sepquant.kernels import conv2d_nchw
from sepquant.quantize import layer_mse, quantize_dequantize


@dataclass
class Conv2d:
    name: str
    out_channels: int
    in_channels: int
    kernel: int
    stride: int
    padding: int
    weight: np.ndarray  # (out_c, in_c, k, k) float32
    bias: np.ndarray  # (out_c,) float32


@dataclass
class Dense:
    name: str
    out_features: int
    in_features: int
    weight: np.ndarray  # (out, in) float32
    bias: np.ndarray  # (out,) float32


@dataclass
class Relu:
    pass


@dataclass
class GlobalAvgPool:
    pass


@dataclass
class Flatten:
    pass


Layer = Conv2d | Dense | Relu | GlobalAvgPool | Flatten

QUANTIZABLE = (Conv2d, Dense)


@dataclass
class ModelGraph:
    name: str
    input_shape: tuple[int, int, int]  # (channels, height, width)
    layers: list[Layer] = field(default_factory=list)

    def quantizable_layers(self) -> list[Conv2d | Dense]:
        return [l for l in self.layers if isinstance(l, QUANTIZABLE)]


@dataclass(frozen=True)
class EvalReport:
    layer_ids: list[str]
    per_layer_mse: list[float]
    top1_accuracy: float
    size_bytes: float
    bops: float

    def __post_init__(self):
        if not 0.0 <= self.top1_accuracy <= 1.0:
            raise ValueError(f"accuracy {self.top1_accuracy} outside [0, 1]")


def _conv_out(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def validate_graph(graph: ModelGraph) -> None:
    """Walk the layer chain symbolically and reject incompatible shapes."""
    shape: tuple[int, ...] = tuple(graph.input_shape)
    for layer in graph.layers:
        if isinstance(layer, Conv2d):
            if len(shape) != 3:
                raise ValueError(f"{layer.name}: conv2d needs a (c, h, w) input, has {shape}")
            c, h, w = shape
            if c != layer.in_channels:
                raise ValueError(
                    f"{layer.name}: expects {layer.in_channels} input channels, gets {c}"
                )
            oh = _conv_out(h, layer.kernel, layer.stride, layer.padding)
            ow = _conv_out(w, layer.kernel, layer.stride, layer.padding)
            if oh < 1 or ow < 1:
                raise ValueError(f"{layer.name}: output collapses to {oh}x{ow}")
            if layer.weight.shape != (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel):
                raise ValueError(f"{layer.name}: weight shape {layer.weight.shape} mismatch")
            shape = (layer.out_channels, oh, ow)
        elif isinstance(layer, Dense):
            if len(shape) != 1:
                raise ValueError(f"{layer.name}: dense needs a flat input, has {shape}")
            if shape[0] != layer.in_features:
                raise ValueError(
                    f"{layer.name}: expects {layer.in_features} features, gets {shape[0]}"
                )
            if layer.weight.shape != (layer.out_features, layer.in_features):
                raise ValueError(f"{layer.name}: weight shape {layer.weight.shape} mismatch")
            shape = (layer.out_features,)
        elif isinstance(layer, GlobalAvgPool):
            if len(shape) != 3:
                raise ValueError(f"global_avgpool needs a (c, h, w) input, has {shape}")
            shape = (shape[0],)
        elif isinstance(layer, Flatten):
            shape = (int(np.prod(shape)),)
        # Relu keeps the shape


def load_model(model_path) -> ModelGraph:
    """Load a model description file and resolve its weight references.

    The weight container path inside the file is relative to the file itself.
    """
    model_path = Path(model_path)
    spec = json.loads(model_path.read_text())
    weights_path = model_path.parent / spec["weights"]
    tensors, _ = container.read_container(weights_path)
    by_name = {t.name: t.data for t in tensors}

    def fetch(ref: str, layer_name: str) -> np.ndarray:
        if ref not in by_name:
            raise ValueError(f"{layer_name}: weight tensor {ref!r} missing from {weights_path}")
        return by_name[ref]

    layers: list[Layer] = []
    for entry in spec["layers"]:
        kind = entry["kind"]
        if kind == "conv2d":
            layers.append(
                Conv2d(
                    name=entry["name"],
                    out_channels=entry["out_channels"],
                    in_channels=entry["in_channels"],
                    kernel=entry["kernel"],
                    stride=entry.get("stride", 1),
                    padding=entry.get("padding", 0),
                    weight=fetch(entry["weight"], entry["name"]),
                    bias=fetch(entry["bias"], entry["name"]),
                )
            )
        elif kind == "dense":
            layers.append(
                Dense(
                    name=entry["name"],
                    out_features=entry["out_features"],
                    in_features=entry["in_features"],
                    weight=fetch(entry["weight"], entry["name"]),
                    bias=fetch(entry["bias"], entry["name"]),
                )
            )
        elif kind == "relu":
            layers.append(Relu())
        elif kind == "global_avgpool":
            layers.append(GlobalAvgPool())
        elif kind == "flatten":
            layers.append(Flatten())
        else:
            raise ValueError(f"unknown layer kind {kind!r}")

    graph = ModelGraph(
        name=spec.get("name", model_path.stem),
        input_shape=tuple(spec["input_shape"]),
        layers=layers,
    )
    validate_graph(graph)
    return graph


def graph_profiles(graph: ModelGraph) -> list[LayerProfile]:
    """Analytic per-layer parameter and MAC counts (biases excluded)."""
    profiles = []
    shape: tuple[int, ...] = tuple(graph.input_shape)
    for layer in graph.layers:
        if isinstance(layer, Conv2d):
            _, h, w = shape
            oh = _conv_out(h, layer.kernel, layer.stride, layer.padding)
            ow = _conv_out(w, layer.kernel, layer.stride, layer.padding)
            profiles.append(
                LayerProfile(
                    layer_id=layer.name,
                    param_count=layer.out_channels * layer.in_channels * layer.kernel**2,
                    mac_count=oh * ow * layer.out_channels * layer.in_channels * layer.kernel**2,
                )
            )
            shape = (layer.out_channels, oh, ow)
        elif isinstance(layer, Dense):
            profiles.append(
                LayerProfile(
                    layer_id=layer.name,
                    param_count=layer.out_features * layer.in_features,
                    mac_count=layer.out_features * layer.in_features,
                )
            )
            shape = (layer.out_features,)
        elif isinstance(layer, GlobalAvgPool):
            shape = (shape[0],)
        elif isinstance(layer, Flatten):
            shape = (int(np.prod(shape)),)
    return profiles


def forward(
    graph: ModelGraph,
    batch: np.ndarray,
    record_features: bool = False,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Run the network on an (n, c, h, w) batch, returning logits and, when
    requested, the post-activation feature map of every quantizable layer.

    A quantizable layer immediately followed by relu records the relu output;
    otherwise its raw output (the logits layer has no nonlinearity).
    """
    x = np.asarray(batch, dtype=np.float32)
    if x.ndim != 4 or tuple(x.shape[1:]) != tuple(graph.input_shape):
        first = next((l.name for l in graph.layers if isinstance(l, QUANTIZABLE)), "input")
        raise ValueError(
            f"{first}: batch shape {x.shape} incompatible with model input {graph.input_shape}"
        )

    features: dict[str, np.ndarray] = {}
    last_quantizable: str | None = None
    for layer in graph.layers:
        if isinstance(layer, Conv2d):
            if x.ndim != 4 or x.shape[1] != layer.in_channels:
                raise ValueError(f"{layer.name}: got activation shape {x.shape}")
            x = conv2d_nchw(x, layer.weight, layer.bias, layer.stride, layer.padding)
            last_quantizable = layer.name
        elif isinstance(layer, Dense):
            if x.ndim != 2 or x.shape[1] != layer.in_features:
                raise ValueError(f"{layer.name}: got activation shape {x.shape}")
            x = (
                x.astype(np.float64) @ layer.weight.astype(np.float64).T
                + layer.bias.astype(np.float64)
            ).astype(np.float32)
            last_quantizable = layer.name
        elif isinstance(layer, Relu):
            x = np.maximum(x, 0)
        elif isinstance(layer, GlobalAvgPool):
            x = x.astype(np.float64).mean(axis=(2, 3)).astype(np.float32)
            last_quantizable = None
        else:  # Flatten
            x = x.reshape(x.shape[0], -1)
            last_quantizable = None
        if record_features and last_quantizable is not None:
            features[last_quantizable] = x
    return x, features


def quantize_graph(graph: ModelGraph, bits: list[int]) -> tuple[ModelGraph, list[float]]:
    """Fake-quantize each quantizable layer's weights at its configured
    bit-width, returning the quantized graph and per-layer MSE. Biases stay
    in full precision."""
    quantizable = graph.quantizable_layers()
    if len(bits) != len(quantizable):
        raise ValueError(
            f"bit config has {len(bits)} entries for {len(quantizable)} quantizable layers"
        )
    mses = []
    by_id = dict(zip((l.name for l in quantizable), bits))
    new_layers: list[Layer] = []
    for layer in graph.layers:
        if isinstance(layer, QUANTIZABLE):
            dq, _ = quantize_dequantize(layer.weight, by_id[layer.name])
            mses.append(layer_mse(layer.weight, dq))
            new_layers.append(
                type(layer)(
                    **{
                        **layer.__dict__,
                        "weight": dq.astype(np.float32),
                    }
                )
            )
        else:
            new_layers.append(layer)
    quantized = ModelGraph(name=graph.name, input_shape=graph.input_shape, layers=new_layers)
    return quantized, mses


def evaluate_config(
    graph: ModelGraph,
    bits: list[int],
    images: np.ndarray,
    labels: np.ndarray,
    activation_bits: int = 8,
) -> EvalReport:
    """Quantize weights per the bit configuration, run inference, and report
    top-1 accuracy, per-layer weight MSE, model size and BOPs.

    Activations stay in full precision; activation_bits enters only the BOPs
    accounting.
    """
    quantized, mses = quantize_graph(graph, bits)
    logits, _ = forward(quantized, images)
    predictions = np.argmax(logits, axis=1)
    accuracy = float(np.mean(predictions == np.asarray(labels).astype(np.int64)))
    profiles = graph_profiles(graph)
    return EvalReport(
        layer_ids=[p.layer_id for p in profiles],
        per_layer_mse=mses,
        top1_accuracy=accuracy,
        size_bytes=model_size(list(bits), profiles),
        bops=bops(list(bits), profiles, activation_bits),
    )
