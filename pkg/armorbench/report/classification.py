"""
Classification metrics from confusion matrices.

Rows of a confusion matrix are true classes, columns predicted classes. A
class whose precision or recall denominator is zero contributes 0 and is
listed in the bundle's undefined_* flags. Macro averages run over classes
with nonzero support.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidInputError, LabelIndexError


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K counts, rows = true class, columns = predicted class."""

    counts: np.ndarray

    @property
    def num_classes(self):
        return int(self.counts.shape[0])

    @property
    def total(self):
        return int(self.counts.sum())

    def to_list(self):
        return self.counts.tolist()


@dataclass(frozen=True)
class MetricsBundle:
    """Accuracy plus per-class and macro precision / recall / F1."""

    accuracy: float
    precision: tuple
    recall: tuple
    f1: tuple
    support: tuple
    macro_precision: float
    macro_recall: float
    macro_f1: float
    undefined_precision: tuple = ()
    undefined_recall: tuple = ()
    n: int = 0

    def to_dict(self):
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


def confusion_matrix(y_true, y_pred, k):
    """Count (true, predicted) pairs into a K x K matrix."""
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise InvalidInputError(f"{y_true.size} true labels but {y_pred.size} predictions")
    for name, labels in (("true", y_true), ("predicted", y_pred)):
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise LabelIndexError(f"{name} label outside [0, {k})")

    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def _safe_ratio(numerator, denominator):
    out = np.zeros(len(numerator), dtype=np.float64)
    defined = denominator > 0
    out[defined] = numerator[defined] / denominator[defined]
    return out, defined


def metrics(confusion):
    """Metrics bundle of a confusion matrix."""
    counts = np.asarray(getattr(confusion, "counts", confusion), dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise InvalidInputError("metrics of an empty confusion matrix")

    tp = np.diag(counts).astype(np.float64)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    precision, precision_defined = _safe_ratio(tp, predicted)
    recall, recall_defined = _safe_ratio(tp, support)
    f1, _ = _safe_ratio(2.0 * precision * recall, precision + recall)

    present = support > 0
    return MetricsBundle(
        accuracy=float(tp.sum() / total),
        precision=tuple(float(v) for v in precision),
        recall=tuple(float(v) for v in recall),
        f1=tuple(float(v) for v in f1),
        support=tuple(int(v) for v in support),
        macro_precision=float(precision[present].mean()),
        macro_recall=float(recall[present].mean()),
        macro_f1=float(f1[present].mean()),
        undefined_precision=tuple(int(k) for k in np.flatnonzero(~precision_defined)),
        undefined_recall=tuple(int(k) for k in np.flatnonzero(~recall_defined)),
        n=total,
    )


def classification_metrics(y_true, y_pred, k):
    """Confusion matrix and metrics bundle in one call."""
    confusion = confusion_matrix(y_true, y_pred, k)
    return confusion, metrics(confusion)
