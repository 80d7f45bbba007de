"""Labelled image datasets and stratified splitting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import as_tensor


@dataclass
class LabeledDataset:
    images: np.ndarray  # (N, H, W, C) float32
    labels: np.ndarray  # (N,) int64
    class_count: int

    def __post_init__(self):
        self.images = as_tensor(self.images, "images")
        if self.images.ndim != 4:
            raise ValueError(f"images must be NxHxWxC, got shape {self.images.shape}")
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.labels) != len(self.images):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.class_count < 1:
            raise ValueError("class_count must be positive")
        if np.any(self.labels < 0) or np.any(self.labels >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")

    def __len__(self):
        return len(self.labels)

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.images[idx], self.labels[idx], self.class_count)


def split_dataset(d: LabeledDataset, fraction: float, seed: int):
    """Stratified split into (``fraction`` part, remainder).

    Each class contributes round(fraction * count) samples to the first part
    (at least one, and at most count - 1 when the class has two or more
    samples). Samples keep their original relative order in both parts.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    picked = []
    for c in range(d.class_count):
        members = np.flatnonzero(d.labels == c)
        if len(members) == 0:
            continue
        if len(members) * fraction < 1.0 - 1e-9:
            raise ValueError(
                f"class {c} has {len(members)} samples, fewer than 1/fraction = {1 / fraction:.3g}"
            )
        take = max(1, int(np.floor(len(members) * fraction + 0.5)))
        if len(members) > 1:
            take = min(take, len(members) - 1)
        picked.append(rng.permutation(members)[:take])
    mask = np.zeros(len(d), dtype=bool)
    if picked:
        mask[np.concatenate(picked)] = True
    return d.subset(np.flatnonzero(mask)), d.subset(np.flatnonzero(~mask))
