"""Desk-scale SGD trainer, model presets and synthetic texture data."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import layers as L
from .data import LabeledDataset
from .errors import DimensionError, DivergenceError
from .graph import ModelGraph, infer_shapes

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-6
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")


# -- architectures ----------------------------------------------------------

def tiny3_arch(input_shape=(16, 16, 1), classes: int = 3, filters: int = 16, hidden: int = 32) -> dict:
    conv_block = [
        {"kind": "conv2d", "filters": filters, "kernel": 3},
        {"kind": "relu"},
        {"kind": "maxpool", "window": 2},
    ]
    return {
        "name": "tiny3",
        "input_shape": list(input_shape),
        "layers": conv_block * 3 + [
            {"kind": "flatten"},
            {"kind": "dense", "units": hidden},
            {"kind": "relu"},
            {"kind": "dense", "units": classes},
            {"kind": "softmax"},
        ],
    }


PRESETS = {"tiny3": tiny3_arch}


def _he_uniform(rng, shape, fan_in):
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


def build_model(arch: dict, seed: int = 0) -> ModelGraph:
    """Instantiate an architecture description with He-uniform weights."""
    rng = np.random.default_rng(seed)
    shape = tuple(arch["input_shape"])
    layers = []
    for spec in arch["layers"]:
        kind = spec["kind"]
        if kind == "conv2d":
            k = spec.get("kernel", 3)
            cin = shape[-1]
            kernel = _he_uniform(rng, (k, k, cin, spec["filters"]), k * k * cin)
            layer = L.conv2d(kernel, np.zeros(spec["filters"], np.float32),
                             spec.get("stride", 1), spec.get("padding", "same"))
        elif kind == "dense":
            fan_in = shape[0]
            layer = L.dense(_he_uniform(rng, (fan_in, spec["units"]), fan_in), np.zeros(spec["units"], np.float32))
        elif kind == "maxpool":
            layer = L.maxpool(spec.get("window", 2), spec.get("stride"))
        elif kind == "batchnorm":
            c = shape[-1]
            layer = L.batchnorm(np.ones(c, np.float32), np.zeros(c, np.float32),
                                np.zeros(c, np.float32), np.ones(c, np.float32), spec.get("eps", 1e-3))
        elif kind in ("flatten", "relu", "softmax"):
            layer = L.Layer(kind)
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
        layer_shape = L.output_shape(layer, shape)
        layers.append(layer)
        shape = layer_shape
    return ModelGraph(arch.get("name", "model"), tuple(arch["input_shape"]), layers)


def build_preset(name: str, input_shape=(16, 16, 1), classes: int = 3, seed: int = 0) -> ModelGraph:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return build_model(PRESETS[name](input_shape, classes), seed)


# -- data -------------------------------------------------------------------

def make_synthetic_dataset(classes: int, per_class: int, size: int = 16, seed: int = 0,
                           channels: int = 1, noise: float = 0.6) -> LabeledDataset:
    """Oriented sinusoidal gratings, one orientation/frequency band per class.

    Every sample draws its own phase, amplitude and a small orientation
    jitter, then gets additive Gaussian noise.
    """
    if classes < 1 or per_class < 1 or size < 1 or channels < 1:
        raise ValueError("classes, per_class, size and channels must all be positive")
    rng = np.random.default_rng(seed)
    n = classes * per_class
    labels = np.repeat(np.arange(classes), per_class)
    theta = np.pi * labels / classes + rng.uniform(-1, 1, n) * np.pi / (6 * classes)
    freq = (2.0 + (labels % 2)) + rng.uniform(-0.3, 0.3, n)
    phase = rng.uniform(0, 2 * np.pi, n)
    amp = rng.uniform(0.6, 1.4, n)
    yy, xx = np.mgrid[0:size, 0:size] / size
    proj = xx[None] * np.cos(theta)[:, None, None] + yy[None] * np.sin(theta)[:, None, None]
    base = amp[:, None, None] * np.sin(2 * np.pi * freq[:, None, None] * proj + phase[:, None, None])
    images = base[..., None] + noise * rng.standard_normal((n, size, size, channels))
    order = rng.permutation(n)
    return LabeledDataset(images[order].astype(np.float32), labels[order], classes)


# -- training ---------------------------------------------------------------

def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. the logits (log-sum-exp form)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    n = len(labels)
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def loss_and_grads(g: ModelGraph, x: np.ndarray, labels: np.ndarray):
    """Cross-entropy on the pre-softmax output, plus per-layer parameter gradients."""
    stop = len(g.layers) - 1 if g.layers and g.layers[-1].kind == "softmax" else len(g.layers)
    acts = [x]
    for layer in g.layers[:stop]:
        acts.append(L.forward(layer, acts[-1]))
    loss, grad = softmax_cross_entropy(acts[-1], labels)
    grads = {}
    for i in reversed(range(stop)):
        pg, grad = L.backward(g.layers[i], acts[i], acts[i + 1], grad)
        if pg:
            grads[i] = pg
    return loss, grads


def train(g: ModelGraph, d: LabeledDataset, cfg: TrainConfig):
    """SGD with momentum and decoupled weight decay. Returns (model, per-epoch mean loss)."""
    shapes = infer_shapes(g)
    if shapes[-1] != (d.class_count,):
        raise DimensionError(f"model emits {shapes[-1]} outputs but the dataset has {d.class_count} classes")
    if tuple(d.images.shape[1:]) != g.input_shape:
        raise DimensionError(f"images {d.images.shape[1:]} do not match model input {g.input_shape}")
    model = g.copy()
    rng = np.random.default_rng(cfg.seed)
    velocity = {
        (i, name): np.zeros(layer.params[name].shape)
        for i, layer in enumerate(model.layers)
        for name in L.TRAINABLE.get(layer.kind, ())
    }
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(d))
        total, seen = 0.0, 0
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, grads = loss_and_grads(model, d.images[idx], d.labels[idx])
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch starting {s}; lower the learning rate")
            total += loss * len(idx)
            seen += len(idx)
            for (i, name), v in velocity.items():
                p = model.layers[i].params[name].astype(np.float64)
                v *= cfg.momentum
                v += grads[i][name]
                p = p - cfg.learning_rate * v - cfg.weight_decay * p
                model.layers[i].params[name] = p.astype(np.float32)
        history.append(total / seen)
        log.info("epoch %d/%d loss %.4f", epoch + 1, cfg.epochs, history[-1])
    return model, history
