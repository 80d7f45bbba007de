"""Accuracy, parameter counts and the remaining-parameters ratio."""
from __future__ import annotations

from dataclasses import asdict, dataclass

from .graph import ModelGraph, count_parameters
from .inference import accuracy, predict


@dataclass
class MetricsReport:
    base_accuracy: float
    pruned_accuracy: float
    acc_drop: float  # percentage points; negative means the pruned model is better
    np_original: int
    np_pruned: int
    rpr: float

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        header = ("Base (%)", "Acc (%)", "Acc. Drop (%)", "RPR (%)", "Params (O)", "Params (S)")
        row = (
            f"{100 * self.base_accuracy:.2f}",
            f"{100 * self.pruned_accuracy:.2f}",
            f"{self.acc_drop:.2f}",
            f"{100 * self.rpr:.2f}",
            str(self.np_original),
            str(self.np_pruned),
        )
        widths = [max(len(h), len(r)) for h, r in zip(header, row)]
        fmt = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))  # noqa: E731
        return "\n".join([fmt(header), fmt(row)])


def rpr(np_o: int, np_s: int) -> float:
    """Remaining-parameters ratio, 1 - (NP_O - NP_S) / NP_O."""
    if np_o <= 0:
        raise ValueError("original parameter count must be positive")
    if np_s < 0 or np_s > np_o:
        raise ValueError(f"pruned parameter count {np_s} outside [0, {np_o}]")
    return 1.0 - (np_o - np_s) / np_o


def evaluate(original: ModelGraph, pruned: ModelGraph, test, batch_size: int = 256,
             workers: int = 1) -> MetricsReport:
    if len(test) == 0:
        raise ValueError("empty test set")
    base = accuracy(predict(original, test, batch_size, workers), test.labels)
    acc = accuracy(predict(pruned, test, batch_size, workers), test.labels)
    np_o, np_s = count_parameters(original), count_parameters(pruned)
    return MetricsReport(base, acc, 100.0 * (base - acc), np_o, np_s, rpr(np_o, np_s))
