"""Filter removal and weight transfer for chain-topology networks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .graph import ModelGraph, count_parameters, infer_shapes
from .inference import capture_activations
from .layers import Layer
from .metrics import rpr
from .scoring import ImportanceReport, score_layer, select_filters

log = logging.getLogger(__name__)


@dataclass
class PruneConfig:
    k: float = 40.0
    workers: int = 1
    batch_size: int = 256
    capture_policy: str = "post-activation"
    # optional per-conv-layer override of k, keyed by layer index
    layer_k: dict = field(default_factory=dict)

    def __post_init__(self):
        for value in [self.k, *self.layer_k.values()]:
            if not 0 <= value < 100:
                raise ValueError(f"k must lie in [0, 100), got {value}")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.capture_policy != "post-activation":
            raise ValueError("only the post-activation capture policy is supported")


@dataclass
class PrunePlan:
    kept_out: dict  # conv layer index -> kept filter indices, ascending
    kept_in: dict  # conv/dense/batchnorm layer index -> kept input channel (or row) indices


def _propagate(g: ModelGraph, kept_out: dict) -> dict:
    shapes = infer_shapes(g)
    current = list(range(g.input_shape[-1]))
    kept_in = {}
    for i, layer in enumerate(g.layers):
        in_shape = shapes[i - 1] if i else g.input_shape
        if layer.kind == "conv2d":
            kept_in[i] = current
            current = list(kept_out[i])
        elif layer.kind == "batchnorm":
            kept_in[i] = current
        elif layer.kind == "flatten":
            if len(in_shape) == 3:
                h, w, c = in_shape
                current = [(r * w + q) * c + ch for r in range(h) for q in range(w) for ch in current]
        elif layer.kind == "dense":
            kept_in[i] = current
            current = list(range(shapes[i][0]))
    return kept_in


def plan_prune(g: ModelGraph, reports) -> PrunePlan:
    """Turn one ImportanceReport per conv layer into kept-index lists for every layer."""
    convs = g.conv_indices()
    reports = list(reports.values()) if isinstance(reports, dict) else list(reports)
    if len(reports) != len(convs):
        raise ValueError(f"{len(reports)} reports for {len(convs)} conv layers")
    kept_out = {}
    for idx, rep in zip(convs, reports):
        if rep.layer_index is not None and rep.layer_index != idx:
            raise ValueError(f"report for layer {rep.layer_index} given where conv layer {idx} was expected")
        if len(rep.keep_mask) != g.layers[idx].filters:
            raise ValueError(f"layer {idx} has {g.layers[idx].filters} filters but report covers {len(rep.keep_mask)}")
        kept = rep.kept_indices
        if not kept:
            raise ValueError(f"report for layer {idx} keeps no filters")
        kept_out[idx] = kept
    return PrunePlan(kept_out, _propagate(g, kept_out))


def keep_all_plan(g: ModelGraph) -> PrunePlan:
    kept_out = {i: list(range(g.layers[i].filters)) for i in g.conv_indices()}
    return PrunePlan(kept_out, _propagate(g, kept_out))


def _check_plan(g: ModelGraph, plan: PrunePlan):
    convs = g.conv_indices()
    if sorted(plan.kept_out) != convs:
        raise ValueError(f"plan covers layers {sorted(plan.kept_out)}, graph has conv layers {convs}")
    for i in convs:
        kept = list(plan.kept_out[i])
        m = g.layers[i].filters
        if not kept or kept != sorted(set(kept)) or kept[0] < 0 or kept[-1] >= m:
            raise ValueError(f"layer {i}: kept filters must be a non-empty ascending subset of 0..{m - 1}")
    expected = _propagate(g, plan.kept_out)
    if {i: list(v) for i, v in plan.kept_in.items()} != expected:
        raise ValueError("plan input-channel lists are inconsistent with the graph")


def apply_prune(g: ModelGraph, plan: PrunePlan) -> ModelGraph:
    """Build the smaller graph by copying surviving weight slices; nothing is retrained."""
    _check_plan(g, plan)
    layers = []
    for i, layer in enumerate(g.layers):
        p = layer.params
        if layer.kind == "conv2d":
            kin, kout = plan.kept_in[i], plan.kept_out[i]
            kernel = np.take(np.take(p["kernel"], kin, axis=2), kout, axis=3)
            params = {"kernel": kernel, "bias": np.take(p["bias"], kout)}
        elif layer.kind == "dense":
            params = {"weights": np.take(p["weights"], plan.kept_in[i], axis=0), "bias": p["bias"].copy()}
        elif layer.kind == "batchnorm":
            params = {name: np.take(v, plan.kept_in[i]) for name, v in p.items()}
        else:
            params = {}
        layers.append(Layer(layer.kind, params, dict(layer.hyper)))
    pruned = ModelGraph(g.name, g.input_shape, layers)
    infer_shapes(pruned)
    return pruned


def score_model(g: ModelGraph, d_var, workers: int = 1, batch_size: int = 256) -> dict:
    """Importance scores for every conv layer, keyed by layer index.

    Layers are captured one at a time so only one layer's maps are resident.
    """
    scores = {}
    for idx in g.conv_indices():
        capture = capture_activations(g, d_var, idx, batch_size=batch_size, workers=workers)
        scores[idx] = score_layer(capture, workers)
        log.info("scored layer %d: %d filters over %d images", idx, capture.filters, capture.images)
        del capture
    return scores


def select_all(scores: dict, cfg: PruneConfig) -> list[ImportanceReport]:
    return [select_filters(s, cfg.layer_k.get(idx, cfg.k), idx) for idx, s in scores.items()]


def ocnna(g: ModelGraph, d_var, cfg: PruneConfig | None = None):
    """Score, select, plan and transfer; returns (pruned graph, reports)."""
    cfg = cfg or PruneConfig()
    scores = score_model(g, d_var, cfg.workers, cfg.batch_size)
    reports = select_all(scores, cfg)
    pruned = apply_prune(g, plan_prune(g, reports))
    return pruned, reports


def prune_manifest(original: ModelGraph, pruned: ModelGraph, reports) -> dict:
    np_o, np_s = count_parameters(original), count_parameters(pruned)
    return {
        "model": original.name,
        "layers": [
            dict(rep.to_dict(), filters_before=len(rep.keep_mask), filters_after=int(rep.keep_mask.sum()))
            for rep in reports
        ],
        "np_original": np_o,
        "np_pruned": np_s,
        "rpr": rpr(np_o, np_s),
    }
