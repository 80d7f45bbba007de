"""Forward evaluation, predictions and per-filter activation capture."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import DimensionError
from .graph import ModelGraph
from .parallel import indexed_map

# elementwise layers folded into a conv layer's captured output
_FOLLOWERS = ("batchnorm", "relu")


@dataclass
class ActivationCapture:
    layer_index: int
    maps: np.ndarray  # (filters, images, H, W)

    @property
    def per_filter(self) -> np.ndarray:
        """``per_filter[m][i]`` is filter ``m``'s 2-D output map for image ``i``."""
        return self.maps

    @property
    def filters(self) -> int:
        return self.maps.shape[0]

    @property
    def images(self) -> int:
        return self.maps.shape[1]


def _images(g: ModelGraph, data) -> np.ndarray:
    images = data.images if isinstance(data, LabeledDataset) else np.asarray(data, dtype=np.float32)
    if images.ndim != 4 or tuple(images.shape[1:]) != g.input_shape:
        raise DimensionError(f"dataset images have shape {images.shape[1:]}, model expects {g.input_shape}")
    return images


def _batched(images, batch_size, workers, fn):
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    starts = range(0, len(images), batch_size)
    parts = indexed_map(lambda s: fn(images[s:s + batch_size]), starts, workers)
    return np.concatenate(parts, axis=0)


def forward_all(g: ModelGraph, data, batch_size: int = 256, workers: int = 1, upto=None) -> np.ndarray:
    images = _images(g, data)
    return _batched(images, batch_size, workers, lambda x: g.forward(x, upto))


def predict(g: ModelGraph, data, batch_size: int = 256, workers: int = 1) -> np.ndarray:
    """Argmax class index per image."""
    out = forward_all(g, data, batch_size, workers)
    return out.argmax(axis=1)


def capture_end(g: ModelGraph, layer_index: int) -> int:
    """Index one past the last layer folded into the capture of ``layer_index``."""
    end = layer_index + 1
    while end < len(g.layers) and g.layers[end].kind in _FOLLOWERS:
        end += 1
    return end


def capture_activations(g: ModelGraph, data, layer_index: int, batch_size: int = 256,
                        workers: int = 1) -> ActivationCapture:
    """Post-activation output maps of a conv layer, before any pooling."""
    if not 0 <= layer_index < len(g.layers) or g.layers[layer_index].kind != "conv2d":
        raise ValueError(f"layer {layer_index} is not a conv2d layer")
    out = forward_all(g, data, batch_size, workers, upto=capture_end(g, layer_index))
    return ActivationCapture(layer_index, np.ascontiguousarray(out.transpose(3, 0, 1, 2)))


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise DimensionError(f"{predictions.shape} predictions vs {labels.shape} labels")
    if len(labels) == 0:
        raise ValueError("accuracy of an empty set is undefined")
    return float(np.mean(predictions == labels))
