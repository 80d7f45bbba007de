"""Filter importance: per-image PCA, Frobenius norm, coefficient of variation.

A filter's importance is the coefficient of variation, across the scoring
images, of the Frobenius norm of the PCA projection of its output map.  A
filter whose summarised response barely changes from image to image gets a
low score and is the first to go.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .errors import NonFiniteError, NumericError
from .inference import ActivationCapture
from .parallel import indexed_map
from .tensor import as_matrix

RETAINED_VARIANCE = 0.95
# absorbs rounding in the cumulative explained-variance sum
_CUM_TOL = 1e-12


@dataclass
class PCAResult:
    scores: np.ndarray  # (observations, component_count)
    components: np.ndarray  # (variables, component_count), orthonormal columns
    explained_variance_ratio: np.ndarray  # per component, all of them, descending
    retained_variance_ratio: float
    component_count: int


@dataclass
class ScoreTrace:
    per_image_norms: np.ndarray
    cv: float


@dataclass
class ImportanceReport:
    layer_index: int | None
    scores: np.ndarray
    keep_mask: np.ndarray
    threshold: float
    k: float

    @property
    def kept_indices(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.keep_mask)]

    def to_dict(self) -> dict:
        return {
            "layer_index": self.layer_index,
            "k": self.k,
            "threshold": self.threshold,
            "scores": [float(s) for s in self.scores],
            "keep_mask": [bool(b) for b in self.keep_mask],
            "kept": self.kept_indices,
        }


def pca_95(m, retain: float = RETAINED_VARIANCE) -> PCAResult:
    """PCA of a 2-D map, rows as observations and columns as variables.

    Keeps the fewest leading components whose cumulative explained variance
    reaches ``retain``. A map with no variance gives zero components.
    """
    x = np.asarray(as_matrix(m, "map"), dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("pca: map contains NaN or Inf")
    h, w = x.shape
    centered = x - x.mean(axis=0)
    centered[:, np.ptp(x, axis=0) == 0] = 0.0
    cov = centered.T @ centered / max(h - 1, 1)
    total = float(np.trace(cov))
    if total <= 0.0:
        return PCAResult(np.zeros((h, 0)), np.zeros((w, 0)), np.zeros(w), 1.0, 0)

    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals[::-1], 0.0, None)
    evecs = evecs[:, ::-1]
    ratios = evals / evals.sum()
    cumulative = np.cumsum(ratios)
    count = int(np.searchsorted(cumulative, retain - _CUM_TOL)) + 1
    count = min(count, w)

    comps = evecs[:, :count].copy()
    lead = np.abs(comps).argmax(axis=0)
    signs = np.sign(comps[lead, np.arange(count)])
    signs[signs == 0] = 1.0
    comps *= signs
    return PCAResult(centered @ comps, comps, ratios, float(min(cumulative[count - 1], 1.0)), count)


def frobenius_norm(m) -> float:
    """Square root of the sum of squared entries."""
    a = np.asarray(m, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a)))


def frobenius_norm_trace(m) -> float:
    """Same norm computed as sqrt(trace(A A^H))."""
    a = np.asarray(m, dtype=np.float64)
    if a.size == 0:
        return 0.0
    return float(np.sqrt(np.trace(a @ a.conj().T).real))


def coefficient_of_variation(xs) -> float:
    """Population standard deviation over mean; 0 when the mean is 0."""
    v = np.asarray(xs, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("coefficient of variation of an empty vector")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("coefficient of variation: non-finite input")
    mu = v.mean()
    if mu == 0.0:
        return 0.0
    return float(v.std() / mu)


def score_filter(maps) -> ScoreTrace:
    """Importance trace of one filter given its maps, shape (images, H, W)."""
    norms = np.array([frobenius_norm(pca_95(im).scores) for im in maps])
    return ScoreTrace(norms, coefficient_of_variation(norms))


def score_traces(capture: ActivationCapture, workers: int = 1) -> list[ScoreTrace]:
    if capture.filters == 0 or capture.images == 0:
        raise ValueError("empty activation capture")

    def task(m):
        try:
            return score_filter(capture.per_filter[m])
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise NumericError(f"layer {capture.layer_index}, filter {m}: {exc}") from exc

    return indexed_map(task, range(capture.filters), workers)


def score_layer(capture: ActivationCapture, workers: int = 1) -> np.ndarray:
    return np.array([t.cv for t in score_traces(capture, workers)])


def _check_k(k):
    if not isinstance(k, (int, float)) or isinstance(k, bool) or not 0 <= k < 100:
        raise ValueError(f"k must lie in [0, 100), got {k!r}")


def kept_count(filters: int, k: float) -> int:
    """max(1, ceil((100 - k) / 100 * filters)), in exact decimal arithmetic."""
    _check_k(k)
    n = math.ceil((Decimal(100) - Decimal(str(k))) * filters / Decimal(100))
    return max(1, int(n))


def select_filters(scores, k: float, layer_index: int | None = None) -> ImportanceReport:
    """Keep the highest-scoring filters; ties go to the lower index."""
    _check_k(k)
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise ValueError("no scores to select from")
    if not np.all(np.isfinite(s)):
        raise NonFiniteError("scores contain NaN or Inf")
    n = kept_count(s.size, k)
    order = sorted(range(s.size), key=lambda i: (-s[i], i))
    mask = np.zeros(s.size, dtype=bool)
    mask[order[:n]] = True
    return ImportanceReport(layer_index, s, mask, float(s[order[n - 1]]), k)
