"""``.ocnn`` model and ``.ocnd`` dataset files.

Layout (all integers little-endian)::

    magic      4 bytes   b"OCNN" or b"OCND"
    version    u16
    length     u32       byte length of the manifest
    manifest   UTF-8 JSON
    payload    raw blobs; offsets in the manifest are relative to its start

Model tensors are f32, dataset labels are u32.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import LabeledDataset
from .errors import (BadMagicError, DimensionError, ManifestError, NonFiniteError,
                     TruncatedError, UnsupportedVersionError)
from .graph import ModelGraph, infer_shapes
from .layers import STORED, Layer

MODEL_MAGIC = b"OCNN"
DATASET_MAGIC = b"OCND"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")

_DTYPES = {"f32": np.dtype("<f4"), "u32": np.dtype("<u4")}


class _PayloadWriter:
    def __init__(self):
        self.chunks = []
        self.offset = 0

    def add(self, arr: np.ndarray, dtype: str) -> dict:
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[dtype]).tobytes()
        entry = {"dtype": dtype, "shape": list(arr.shape), "offset": self.offset, "nbytes": len(raw)}
        self.chunks.append(raw)
        self.offset += len(raw)
        return entry


def _write(path, magic: bytes, manifest: dict, payload: _PayloadWriter):
    text = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, FORMAT_VERSION, len(text)))
        fh.write(text)
        for chunk in payload.chunks:
            fh.write(chunk)


def _read(path, magic: bytes):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        if raw[:4] != magic[: len(raw[:4])]:
            raise BadMagicError(f"{path}: not a {magic.decode()} file")
        raise TruncatedError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    got, version, length = _HEADER.unpack_from(raw)
    if got != magic:
        raise BadMagicError(f"{path}: bad magic {got!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{path}: format version {version} not supported (expected {FORMAT_VERSION})")
    start = _HEADER.size
    if len(raw) < start + length:
        raise TruncatedError(f"{path}: manifest truncated")
    try:
        manifest = json.loads(raw[start:start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: manifest is not valid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    return manifest, memoryview(raw)[start + length:]


def _tensor(payload, entry, where: str) -> np.ndarray:
    try:
        dtype = _DTYPES[entry["dtype"]]
        shape = tuple(int(d) for d in entry["shape"])
        offset, nbytes = int(entry["offset"]), int(entry["nbytes"])
    except (KeyError, TypeError, ValueError):
        raise ManifestError(f"{where}: malformed tensor entry {entry!r}") from None
    if any(d < 0 for d in shape) or offset < 0 or nbytes != int(np.prod(shape)) * dtype.itemsize:
        raise ManifestError(f"{where}: tensor entry shape {shape} inconsistent with {nbytes} bytes")
    if offset + nbytes > len(payload):
        raise TruncatedError(f"{where}: blob needs bytes [{offset}, {offset + nbytes}) but payload has {len(payload)}")
    arr = np.frombuffer(payload[offset:offset + nbytes], dtype=dtype).reshape(shape)
    if dtype.kind == "f":
        arr = arr.astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"{where}: contains NaN or Inf")
    return arr.copy()


def save_model(g: ModelGraph, path) -> None:
    infer_shapes(g)
    payload = _PayloadWriter()
    layers = []
    for layer in g.layers:
        tensors = {name: payload.add(layer.params[name], "f32") for name in STORED.get(layer.kind, ())}
        layers.append({"kind": layer.kind, "hyper": layer.hyper, "tensors": tensors})
    manifest = {"format": "ocnn", "name": g.name, "input_shape": list(g.input_shape), "layers": layers}
    _write(path, MODEL_MAGIC, manifest, payload)


def load_model(path) -> ModelGraph:
    manifest, payload = _read(path, MODEL_MAGIC)
    try:
        entries = manifest["layers"]
        name = str(manifest["name"])
        input_shape = tuple(int(d) for d in manifest["input_shape"])
    except (KeyError, TypeError, ValueError):
        raise ManifestError(f"{path}: manifest lacks name/input_shape/layers") from None
    layers = []
    for i, entry in enumerate(entries):
        try:
            kind, hyper, tensors = entry["kind"], dict(entry.get("hyper", {})), entry.get("tensors", {})
            params = {k: _tensor(payload, v, f"{path}: layer {i} tensor {k!r}") for k, v in tensors.items()}
            layers.append(Layer(kind, params, hyper))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ManifestError(f"{path}: layer {i} is malformed: {exc}") from None
    g = ModelGraph(name, input_shape, layers)
    try:
        infer_shapes(g)
    except KeyError as exc:
        raise ManifestError(f"{path}: missing hyperparameter {exc}") from None
    except DimensionError as exc:
        raise DimensionError(f"{path}: {exc}") from None
    return g


def save_dataset(d: LabeledDataset, path) -> None:
    payload = _PayloadWriter()
    manifest = {
        "format": "ocnd",
        "class_count": int(d.class_count),
        "images": payload.add(d.images, "f32"),
        "labels": payload.add(d.labels, "u32"),
    }
    _write(path, DATASET_MAGIC, manifest, payload)


def load_dataset(path) -> LabeledDataset:
    manifest, payload = _read(path, DATASET_MAGIC)
    try:
        images = _tensor(payload, manifest["images"], f"{path}: images")
        labels = _tensor(payload, manifest["labels"], f"{path}: labels")
        return LabeledDataset(images, labels.astype(np.int64), int(manifest["class_count"]))
    except KeyError as exc:
        raise ManifestError(f"{path}: manifest lacks {exc}") from None
    except ValueError as exc:
        if isinstance(exc, DimensionError):
            raise
        raise ManifestError(f"{path}: {exc}") from None
