"""
Report files: the aggregated JSON report, confusion CSVs and held-out
prediction analysis.
"""

import csv
import json
import os
from collections import Counter

import numpy as np

from ..errors import InvalidInputError


def _ensure_parent(path):
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)


def to_jsonable(value):
    """Convert bundles, dataclass records and numpy values into plain JSON types."""
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_json(data, path):
    """JSON with sorted keys, two-space indent and a trailing newline."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(to_jsonable(data), f, sort_keys=True, indent=2)
        f.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_report(path, baseline=None, finetuned=None, attack_success=None, detectors=None, **sections):
    """
    Write the aggregated report.

    detectors is a sequence of (kind, MetricsBundle). Sections left as None
    are omitted from the document rather than written as null.
    """
    report = {
        "baseline": baseline,
        "finetuned": finetuned,
        "attack_success": attack_success,
        "detectors": None if detectors is None else [
            {"kind": kind, "metrics": bundle} for kind, bundle in detectors
        ],
    }
    report.update(sections)
    report = {key: value for key, value in report.items() if value is not None}
    if not report:
        raise InvalidInputError("report needs at least one section")
    write_json(report, path)
    return report


def write_confusion_csv(confusion, path):
    """K rows of counts under the header pred_0..pred_{K-1}."""
    counts = np.asarray(getattr(confusion, "counts", confusion), dtype=np.int64)
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([f"pred_{k}" for k in range(counts.shape[1])])
        for row in counts:
            writer.writerow([int(v) for v in row])


def held_out_analysis(probabilities, y_true, ids, top=5):
    """
    Per-row predictions and a summary for a held-out slice.

    Returns (rows, summary). Each row is (id, true, predicted, confidence,
    probability row); the summary holds slice accuracy, mean confidence of
    correct and incorrect predictions, and the most frequent confusions.
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.int64)
    if probabilities.shape[0] == 0:
        raise InvalidInputError("held-out slice is empty")

    predicted = np.argmax(probabilities, axis=1)
    confidence = probabilities[np.arange(len(predicted)), predicted]
    correct = predicted == y_true
    rows = [
        (int(i), int(t), int(p), float(c), probabilities[n])
        for n, (i, t, p, c) in enumerate(zip(ids, y_true, predicted, confidence))
    ]

    confusions = Counter((int(t), int(p)) for t, p in zip(y_true[~correct], predicted[~correct]))
    ranked = sorted(confusions.items(), key=lambda item: (-item[1], item[0]))[:top]
    summary = {
        "n": int(len(y_true)),
        "first_id": int(ids[0]),
        "last_id": int(ids[-1]),
        "accuracy": float(correct.mean()),
        "mean_confidence_correct": float(confidence[correct].mean()) if correct.any() else None,
        "mean_confidence_incorrect": float(confidence[~correct].mean()) if (~correct).any() else None,
        "top_confusions": [{"true": t, "predicted": p, "count": n} for (t, p), n in ranked],
    }
    return rows, summary


def write_predictions_csv(rows, path):
    """predictions.csv: id, true and predicted label, confidence, then p_0..p_{K-1}."""
    _ensure_parent(path)
    k = len(rows[0][4]) if rows else 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "true_label", "predicted_label", "confidence"] + [f"p_{j}" for j in range(k)])
        for sample_id, true, pred, confidence, probs in rows:
            writer.writerow([sample_id, true, pred, repr(confidence)] + [repr(float(p)) for p in probs])
