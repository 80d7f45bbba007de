"""Chain-topology network graph."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .layers import Layer, forward, output_shape


@dataclass
class ModelGraph:
    name: str
    input_shape: tuple
    layers: list = field(default_factory=list)

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)

    def conv_indices(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if layer.kind == "conv2d"]

    def shapes(self) -> list[tuple]:
        return infer_shapes(self)

    def forward(self, x: np.ndarray, upto: int | None = None) -> np.ndarray:
        """Run layers ``[0, upto)`` (all of them by default) on a batch."""
        stop = len(self.layers) if upto is None else upto
        for layer in self.layers[:stop]:
            x = forward(layer, x)
        return x

    def copy(self) -> "ModelGraph":
        return copy.deepcopy(self)

    @property
    def output_units(self) -> int:
        return self.shapes()[-1][-1]


def _where(g: ModelGraph, i: int) -> str:
    if i < 0:
        return "model input"
    return f"layer {i} ({g.layers[i].describe()})"


def infer_shapes(g: ModelGraph) -> list[tuple]:
    """Per-layer output shapes; raises DimensionError naming both sides of a mismatch."""
    shapes = []
    shape = g.input_shape
    for i, layer in enumerate(g.layers):
        try:
            shape = output_shape(layer, shape)
        except DimensionError as exc:
            raise DimensionError(
                f"{_where(g, i - 1)} produces shape {shape} which is incompatible with {_where(g, i)}: {exc}"
            ) from None
        shapes.append(shape)
    return shapes


def count_parameters(g: ModelGraph) -> int:
    return sum(layer.parameter_count() for layer in g.layers)


def tensors_equal(a: ModelGraph, b: ModelGraph) -> bool:
    """Structural and bit-level equality of two graphs."""
    if a.input_shape != b.input_shape or len(a.layers) != len(b.layers):
        return False
    for la, lb in zip(a.layers, b.layers):
        if la.kind != lb.kind or la.hyper != lb.hyper or set(la.params) != set(lb.params):
            return False
        for name in la.params:
            pa, pb = la.params[name], lb.params[name]
            if pa.dtype != pb.dtype or pa.shape != pb.shape or pa.tobytes() != pb.tobytes():
                return False
    return True


__all__ = ["Layer", "ModelGraph", "infer_shapes", "count_parameters", "tensors_equal"]
