"""Structured filter pruning driven by per-image PCA, Frobenius norms and
the coefficient of variation of those norms across a scoring set."""
from .data import LabeledDataset, split_dataset
from .graph import ModelGraph, count_parameters, infer_shapes
from .inference import ActivationCapture, accuracy, capture_activations, predict
from .io import load_dataset, load_model, save_dataset, save_model
from .metrics import MetricsReport, evaluate, rpr
from .pruner import PruneConfig, PrunePlan, apply_prune, ocnna, plan_prune
from .scoring import (ImportanceReport, coefficient_of_variation, frobenius_norm,
                      pca_95, score_layer, select_filters)
from .trainer import TrainConfig, build_preset, make_synthetic_dataset, train

__version__ = "0.1.0"
