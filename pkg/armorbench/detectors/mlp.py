"""
One-hidden-layer network detector.

ReLU hidden layer, softmax output and mean cross-entropy loss, trained with
seeded mini-batch gradient descent with momentum.
"""

import numpy as np
import structlog

from ..errors import ConfigError, TrainingDivergenceError, TruncatedBlobError
from ..model.losses import softmax
from .base import MLP, Detector, check_training_data, resolve_params

log = structlog.get_logger()

MLP_PARAM_ORDER = ("W1", "b1", "W2", "b2")


class MLPNetwork:
    """Dense weights of the network; W1 is D x H and W2 is H x K."""

    def __init__(self, W1, b1, W2, b2):
        self.params = {
            "W1": np.asarray(W1, dtype=np.float64),
            "b1": np.asarray(b1, dtype=np.float64),
            "W2": np.asarray(W2, dtype=np.float64),
            "b2": np.asarray(b2, dtype=np.float64),
        }

    @property
    def num_classes(self):
        return self.params["W2"].shape[1]

    def shapes(self):
        return {name: list(self.params[name].shape) for name in MLP_PARAM_ORDER}

    def forward(self, X):
        pre = X @ self.params["W1"] + self.params["b1"]
        hidden = np.maximum(pre, 0.0)
        logits = hidden @ self.params["W2"] + self.params["b2"]
        return softmax(logits), (X, pre, hidden)

    def predict_proba(self, X):
        return self.forward(X)[0]

    def loss_grads(self, X, y, with_input=False):
        """
        Mean cross-entropy over the batch and its parameter gradients.

        with_input adds the gradient with respect to the feature rows as "input".
        """
        P, (X, pre, hidden) = self.forward(X)
        n = X.shape[0]
        loss = float(-np.mean(np.log(np.clip(P[np.arange(n), y], 1e-300, None))))

        dlogits = P.copy()
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        dhidden = dlogits @ self.params["W2"].T
        dpre = dhidden * (pre > 0)
        grads = {
            "W1": X.T @ dpre,
            "b1": dpre.sum(axis=0),
            "W2": hidden.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }
        if with_input:
            grads["input"] = dpre @ self.params["W1"].T
        return loss, grads

    def to_dict(self):
        return {"shapes": self.shapes(), "param_order": list(MLP_PARAM_ORDER)}

    def to_blob(self):
        return b"".join(
            np.ascontiguousarray(self.params[name], dtype="<f8").tobytes() for name in MLP_PARAM_ORDER
        )

    @classmethod
    def from_parts(cls, data, blob):
        shapes = data["shapes"]
        expected = sum(int(np.prod(shapes[name])) for name in MLP_PARAM_ORDER) * 8
        if len(blob) != expected:
            raise TruncatedBlobError(f"network blob holds {len(blob)} bytes, expected {expected}")
        arrays, offset = {}, 0
        for name in MLP_PARAM_ORDER:
            count = int(np.prod(shapes[name]))
            arrays[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shapes[name]).copy()
            offset += count * 8
        return cls(**arrays)


def init_mlp(n_features, hidden, num_classes, seed):
    """Glorot-uniform weights and zero biases."""
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return MLPNetwork(
        glorot(n_features, hidden),
        np.zeros(hidden),
        glorot(hidden, num_classes),
        np.zeros(num_classes),
    )


def train_mlp(features, labels, hidden=64, epochs=200, lr=0.05, batch_size=64, momentum=0.9, seed=0):
    """Fit the network; the same seed gives the same weights."""
    X, y, K = check_training_data(features, labels)
    path = "detectors.params.mlp"
    if hidden < 1:
        raise ConfigError(f"hidden must be >= 1, got {hidden}", f"{path}.hidden")
    if epochs < 0 or batch_size < 1:
        raise ConfigError(f"epochs must be >= 0 and batch_size >= 1, got {epochs}, {batch_size}", path)
    if lr < 0 or not 0 <= momentum < 1:
        raise ConfigError(f"lr must be >= 0 and momentum in [0, 1), got {lr}, {momentum}", path)

    network = init_mlp(X.shape[1], hidden, K, seed)
    velocity = {name: np.zeros_like(value) for name, value in network.params.items()}
    rng = np.random.default_rng(seed)

    for epoch in range(1, epochs + 1):
        order = rng.permutation(X.shape[0])
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            loss, grads = network.loss_grads(X[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingDivergenceError("detector network loss is not finite", epoch)
            for name, grad in grads.items():
                velocity[name] = momentum * velocity[name] - lr * grad
                network.params[name] += velocity[name]
            total += loss * len(batch)
        if not all(np.isfinite(p).all() for p in network.params.values()):
            raise TrainingDivergenceError("detector network weights are not finite", epoch)
        if epoch % 50 == 0 or epoch == epochs:
            log.debug("mlp epoch", epoch=epoch, train_loss=total / len(order))

    params = {"hidden": hidden, "epochs": epochs, "lr": lr, "batch_size": batch_size, "momentum": momentum, "seed": seed}
    return Detector(MLP, K, X.shape[1], params, network)


def fit_mlp(features, labels, params=None):
    return train_mlp(features, labels, **resolve_params(MLP, params))
