"""Top-1 accuracy, confusion matrices and index error rates"""
import csv
import io
import os
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.metrics import confusion_matrix

from csaeo.utils.errors import ShapeMismatchError

PathLike = Union[str, os.PathLike]


def _as_predictions(predictions) -> np.ndarray:
    p = np.asarray(predictions)
    # Logits: np.argmax returns the first maximum, i.e. the lowest class index
    if p.ndim == 2:
        return np.argmax(p, axis=1)
    return p.astype(np.int64)


def top1(predictions, labels) -> float:
    """Fraction of samples whose predicted class (or logit argmax) equals the label"""
    p = _as_predictions(predictions)
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise ValueError("top1 of an empty batch")
    if p.shape != y.shape:
        raise ShapeMismatchError(f"{p.shape[0]} predictions for {y.shape[0]} labels")
    return float(np.mean(p == y))


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class"""
    counts: np.ndarray
    class_names: Sequence[str]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ShapeMismatchError(f"confusion counts must be square, got {counts.shape}")
        if counts.shape[0] != len(self.class_names):
            raise ShapeMismatchError("one class name per row is required")
        if np.any(counts < 0):
            raise ValueError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """Row percentages; empty rows stay zero"""
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(100.0 * self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def per_class_accuracy(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        return np.divide(np.diag(self.counts), rows, out=np.full(rows.shape, np.nan), where=rows > 0)

    def accuracy(self) -> float:
        if self.total == 0:
            raise ValueError("accuracy of an empty confusion matrix")
        return float(np.trace(self.counts) / self.total)

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.class_names != self.class_names:
            raise ShapeMismatchError("cannot merge confusion matrices over different classes")
        return ConfusionMatrix(self.counts + other.counts, self.class_names)

    def to_csv(self, path: Optional[PathLike] = None) -> str:
        """Header of class names, then one row of percentages (2 decimals) per true class"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.class_names)
        for row in self.normalized():
            writer.writerow([f"{v:.2f}" for v in row])
        text = buffer.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def as_dict(self):
        return {
            "class_names": list(self.class_names),
            "counts": self.counts,
            "accuracy": self.accuracy() if self.total else None,
        }


def confusion(predictions, labels, n_classes: int, class_names: Optional[Sequence[str]] = None) -> ConfusionMatrix:
    p = _as_predictions(predictions)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape:
        raise ShapeMismatchError(f"{p.shape[0]} predictions for {y.shape[0]} labels")
    for name, values in (("labels", y), ("predictions", p)):
        if values.size and (values.min() < 0 or values.max() >= n_classes):
            raise ValueError(f"{name} must lie in 0..{n_classes - 1}")
    if class_names is None:
        class_names = [str(k) for k in range(n_classes)]
    counts = confusion_matrix(y, p, labels=np.arange(n_classes)) if y.size else np.zeros((n_classes, n_classes))
    return ConfusionMatrix(counts, class_names)


def index_error_rate(sent, received) -> float:
    s = np.asarray(sent)
    r = np.asarray(received)
    if s.shape != r.shape:
        raise ShapeMismatchError(f"sent {s.shape} and received {r.shape} indices differ in shape")
    if s.size == 0:
        return 0.0
    return float(np.mean(s != r))


__all__ = ('top1', 'ConfusionMatrix', 'confusion', 'index_error_rate')
