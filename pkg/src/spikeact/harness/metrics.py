"""Accuracy and confusion matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # rows: truth, columns: prediction

    def __post_init__(self):
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError("counts must be k x k")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.classes == other.classes and np.array_equal(self.counts, other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return 100.0 * float(np.trace(self.counts)) / self.total if self.total else 0.0

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        classes = tuple(sorted(set(self.classes) | set(other.classes)))
        out = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for cm in (self, other):
            idx = [classes.index(c) for c in cm.classes]
            out[np.ix_(idx, idx)] += cm.counts
        return ConfusionMatrix(classes, out)

    def to_csv(self) -> str:
        rows = [",".join(self.classes)]
        rows += [",".join(str(int(v)) for v in row) for row in self.counts]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        classes = tuple(lines[0].split(","))
        counts = np.array([[int(v) for v in ln.split(",")] for ln in lines[1:]], dtype=np.int64)
        return cls(classes, counts.reshape(len(classes), len(classes)))


def evaluate(pred: Sequence, truth: Sequence, classes: Sequence[str] | None = None) -> tuple[float, ConfusionMatrix]:
    """Accuracy in percent and the (truth, prediction) count matrix.

    ``classes`` fixes the row/column order; by default it is the sorted
    union of labels seen in either list.
    """
    pred = [str(p) for p in pred]
    truth = [str(t) for t in truth]
    if len(pred) != len(truth):
        raise ValueError(f"pred and truth differ in length ({len(pred)} vs {len(truth)})")
    if not pred:
        raise ValueError("evaluate needs at least one prediction")
    classes = tuple(classes) if classes is not None else tuple(sorted(set(pred) | set(truth)))
    index = {c: i for i, c in enumerate(classes)}
    missing = (set(pred) | set(truth)) - set(index)
    if missing:
        raise ValueError(f"labels missing from the class list: {sorted(missing)}")
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(counts, ([index[t] for t in truth], [index[p] for p in pred]), 1)
    correct = sum(p == t for p, t in zip(pred, truth))
    return 100.0 * correct / len(pred), ConfusionMatrix(classes, counts)
