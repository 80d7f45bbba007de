"""Layer records and per-kind forward/backward dispatch."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import DimensionError

KINDS = ("conv2d", "maxpool", "dense", "flatten", "relu", "softmax", "batchnorm")

# names of the parameters updated by training, per kind
TRAINABLE = {
    "conv2d": ("kernel", "bias"),
    "dense": ("weights", "bias"),
    "batchnorm": ("gamma", "beta"),
}
# every stored tensor, per kind, in serialisation order
STORED = {
    "conv2d": ("kernel", "bias"),
    "dense": ("weights", "bias"),
    "batchnorm": ("gamma", "beta", "mean", "var"),
}


@dataclass
class Layer:
    kind: str
    params: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        missing = set(STORED.get(self.kind, ())) - set(self.params)
        if missing:
            raise ValueError(f"{self.kind} layer missing tensors {sorted(missing)}")

    @property
    def filters(self) -> int:
        """Output filter count M for a conv layer."""
        if self.kind != "conv2d":
            raise AttributeError(f"{self.kind} layer has no filters")
        return int(self.params["kernel"].shape[3])

    def parameter_count(self) -> int:
        return sum(int(np.prod(self.params[name].shape)) for name in TRAINABLE.get(self.kind, ()))

    def describe(self) -> str:
        if self.kind == "conv2d":
            kh, kw, cin, cout = self.params["kernel"].shape
            return f"conv2d {kh}x{kw} {cin}->{cout} s{self.hyper['stride']} {self.hyper['padding']}"
        if self.kind == "dense":
            f, u = self.params["weights"].shape
            return f"dense {f}->{u}"
        if self.kind == "maxpool":
            return f"maxpool {self.hyper['window']} s{self.hyper['stride']}"
        return self.kind


def conv2d(kernel, bias, stride: int = 1, padding: str = "same") -> Layer:
    if padding not in T.PADDINGS:
        raise ValueError(f"padding must be one of {T.PADDINGS}")
    return Layer("conv2d", {"kernel": kernel, "bias": bias}, {"stride": int(stride), "padding": padding})


def maxpool(window: int = 2, stride: int | None = None) -> Layer:
    return Layer("maxpool", {}, {"window": int(window), "stride": int(stride or window)})


def dense(weights, bias) -> Layer:
    return Layer("dense", {"weights": weights, "bias": bias})


def flatten() -> Layer:
    return Layer("flatten")


def relu() -> Layer:
    return Layer("relu")


def softmax() -> Layer:
    return Layer("softmax")


def batchnorm(gamma, beta, mean, var, eps: float = 1e-3) -> Layer:
    return Layer("batchnorm", {"gamma": gamma, "beta": beta, "mean": mean, "var": var}, {"eps": float(eps)})


def forward(layer: Layer, x: np.ndarray) -> np.ndarray:
    p, h = layer.params, layer.hyper
    k = layer.kind
    if k == "conv2d":
        return T.conv2d_forward(x, p["kernel"], p["bias"], h["stride"], h["padding"])
    if k == "maxpool":
        return T.maxpool2d(x, h["window"], h["stride"])
    if k == "dense":
        return T.dense_forward(x, p["weights"], p["bias"])
    if k == "flatten":
        return x.reshape(x.shape[0], -1)
    if k == "relu":
        return T.relu(x)
    if k == "softmax":
        return T.softmax(x)
    return T.batchnorm_forward(x, p["gamma"], p["beta"], p["mean"], p["var"], h["eps"])


def backward(layer: Layer, x: np.ndarray, y: np.ndarray, grad: np.ndarray):
    """Return ({param name: gradient}, input gradient) given input ``x`` and output ``y``."""
    p, h = layer.params, layer.hyper
    k = layer.kind
    if k == "conv2d":
        dk, db, dx = T.conv2d_backward(x, p["kernel"], h["stride"], h["padding"], grad)
        return {"kernel": dk, "bias": db}, dx
    if k == "dense":
        dw, db, dx = T.dense_backward(x, p["weights"], grad)
        return {"weights": dw, "bias": db}, dx
    if k == "batchnorm":
        dg, db, dx = T.batchnorm_backward(x, p["gamma"], p["mean"], p["var"], h["eps"], grad)
        return {"gamma": dg, "beta": db}, dx
    if k == "maxpool":
        return {}, T.maxpool2d_backward(x, h["window"], h["stride"], grad)
    if k == "flatten":
        return {}, np.asarray(grad).reshape(x.shape)
    if k == "relu":
        return {}, T.relu_backward(x, grad)
    return {}, T.softmax_backward(y, grad)


def output_shape(layer: Layer, shape: tuple) -> tuple:
    """Shape (without batch axis) produced by ``layer`` from an input of ``shape``."""
    k = layer.kind
    if k == "conv2d":
        if len(shape) != 3:
            raise DimensionError(f"conv2d needs an HxWxC input, got {shape}")
        kh, kw, cin, cout = layer.params["kernel"].shape
        if shape[2] != cin:
            raise DimensionError(f"conv2d kernel expects {cin} input channels, got {shape[2]}")
        if layer.params["bias"].shape != (cout,):
            raise DimensionError(f"conv2d bias shape {layer.params['bias'].shape} != ({cout},)")
        s, pad = layer.hyper["stride"], layer.hyper["padding"]
        return (T.conv_geometry(shape[0], kh, s, pad)[2], T.conv_geometry(shape[1], kw, s, pad)[2], cout)
    if k == "maxpool":
        if len(shape) != 3:
            raise DimensionError(f"maxpool needs an HxWxC input, got {shape}")
        w, s = layer.hyper["window"], layer.hyper["stride"]
        if w > shape[0] or w > shape[1]:
            raise DimensionError(f"maxpool window {w} larger than spatial dims {shape[:2]}")
        return ((shape[0] - w) // s + 1, (shape[1] - w) // s + 1, shape[2])
    if k == "dense":
        f, u = layer.params["weights"].shape
        if len(shape) != 1 or shape[0] != f:
            raise DimensionError(f"dense expects {f} input features, got shape {shape}")
        if layer.params["bias"].shape != (u,):
            raise DimensionError(f"dense bias shape {layer.params['bias'].shape} != ({u},)")
        return (u,)
    if k == "flatten":
        return (int(np.prod(shape)),)
    if k == "batchnorm":
        c = shape[-1]
        for name in STORED["batchnorm"]:
            if layer.params[name].shape != (c,):
                raise DimensionError(f"batchnorm {name} has shape {layer.params[name].shape}, expected ({c},)")
        return tuple(shape)
    if k == "softmax" and len(shape) != 1:
        raise DimensionError(f"softmax expects a feature vector, got shape {shape}")
    return tuple(shape)
