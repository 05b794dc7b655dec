"""
Loss functions over logit vectors, with their gradients.

Everything here works in double precision on 1-D logit vectors or on
(N, K) batches of them.
"""

import enum

import numpy as np

from ..errors import ConfigError, LabelIndexError

DLR_EPS = 1e-12


class LossKind(str, enum.Enum):
    """Attack objective."""

    CE = "ce"
    DLR = "dlr"


def softmax(logits):
    """Row-wise softmax with max-subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_label(label, k):
    if not 0 <= int(label) < k:
        raise LabelIndexError(f"label {label} outside [0, {k})")


def loss_ce(logits, label):
    """Cross-entropy -log softmax(logits)[label] of one logit vector."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    _check_label(label, z.size)
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()) - z[int(label)])


def ce_with_grad(logits, labels):
    """Per-row cross-entropy losses and d(loss)/d(logits) for an (N, K) batch."""
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, k = z.shape
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise LabelIndexError(f"labels must lie in [0, {k})")
    m = z.max(axis=1, keepdims=True)
    log_norm = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    rows = np.arange(n)
    losses = log_norm - z[rows, labels]
    grad = softmax(z)
    grad[rows, labels] -= 1.0
    return losses, grad


def _dlr_parts(z, label):
    k = z.size
    if k < 3:
        raise ConfigError(f"DLR loss needs at least 3 classes, got {k}")
    _check_label(label, k)
    label = int(label)
    # stable sort keeps the lowest index first among equal logits
    order = np.argsort(-z, kind="stable")
    others = np.delete(np.arange(k), label)
    runner_up = int(others[np.argmax(z[others])])
    margin = z[label] - z[runner_up]
    denom = z[order[0]] - z[order[2]] + DLR_EPS
    return label, runner_up, int(order[0]), int(order[2]), margin, denom


def dlr_loss(logits, label):
    """
    Negated difference-of-logits ratio.

    -(z_y - max_{i != y} z_i) / (z_(1) - z_(3) + 1e-12), larger when the
    sample is closer to (or past) misclassification.
    """
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    _, _, _, _, margin, denom = _dlr_parts(z, label)
    return float(-margin / denom)


def dlr_with_grad(logits, label):
    """Negated DLR loss of one logit vector and its gradient."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    label, runner_up, top, third, margin, denom = _dlr_parts(z, label)
    grad = np.zeros_like(z)
    grad[label] -= 1.0 / denom
    grad[runner_up] += 1.0 / denom
    grad[top] += margin / denom ** 2
    grad[third] -= margin / denom ** 2
    return float(-margin / denom), grad


def loss_with_grad(logits, label, kind):
    """Loss of the given kind for one logit vector and d(loss)/d(logits)."""
    kind = LossKind(kind)
    if kind is LossKind.DLR:
        return dlr_with_grad(logits, label)
    losses, grad = ce_with_grad(np.asarray(logits).reshape(1, -1), [label])
    return float(losses[0]), grad[0]
