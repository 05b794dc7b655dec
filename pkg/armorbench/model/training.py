"""
Optimizers and the training loop for the dual-encoder model.
Training is single-threaded and fully determined by the config seed.
"""

from dataclasses import asdict, dataclass

import numpy as np
import structlog

from ..errors import ConfigError, InvalidInputError, TrainingDivergenceError

log = structlog.get_logger()

MIN_TEMPERATURE = 1e-3


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    epochs: int = 20
    batch_size: int = 64
    lr: float = 0.05
    optimizer: str = "sgd"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    lr_decay_every: int = 0
    lr_decay_gamma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"must be >= 0, got {self.epochs}", "train.epochs")
        if self.batch_size < 1:
            raise ConfigError(f"must be >= 1, got {self.batch_size}", "train.batch_size")
        if self.lr < 0.0:
            raise ConfigError(f"must be >= 0, got {self.lr}", "train.lr")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}", "train.optimizer")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"must lie in [0,1), got {self.momentum}", "train.momentum")
        if self.weight_decay < 0.0:
            raise ConfigError(f"must be >= 0, got {self.weight_decay}", "train.weight_decay")
        if self.lr_decay_every < 0 or not 0.0 < self.lr_decay_gamma <= 1.0:
            raise ConfigError("decay needs every >= 0 and gamma in (0,1]", "train.lr_decay_gamma")

    def lr_at(self, epoch):
        """Learning rate of a 0-based epoch under the step decay schedule."""
        if self.lr_decay_every:
            return self.lr * self.lr_decay_gamma ** (epoch // self.lr_decay_every)
        return self.lr

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class EpochRecord:
    """One line of the training monitor log."""

    epoch: int
    train_loss: float
    clean_val_acc: float = None
    adv_val_acc: float = None


class SGD:
    """Stochastic gradient descent with heavy-ball momentum and L2 weight decay."""

    def __init__(self, lr, momentum=0.9, weight_decay=0.0):
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {}

    def update(self, params, grads):
        """Return updated float64 parameters."""
        updated = {}
        for name, value in params.items():
            g = grads[name]
            if self.weight_decay and name != "temperature":
                g = g + self.weight_decay * value
            v = self.momentum * self.velocity.get(name, 0.0) - self.lr * g
            self.velocity[name] = v
            updated[name] = value + v
        return updated


class Adam:
    """Adam with bias correction."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = {}
        self.v = {}
        self.t = 0

    def update(self, params, grads):
        self.t += 1
        updated = {}
        for name, value in params.items():
            g = grads[name]
            if self.weight_decay and name != "temperature":
                g = g + self.weight_decay * value
            m = self.beta1 * self.m.get(name, 0.0) + (1.0 - self.beta1) * g
            v = self.beta2 * self.v.get(name, 0.0) + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            updated[name] = value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated


def make_optimizer(config):
    """Build the optimizer named by a TrainConfig."""
    if config.optimizer == "adam":
        return Adam(config.lr, config.beta1, config.beta2, config.adam_eps, config.weight_decay)
    return SGD(config.lr, config.momentum, config.weight_decay)


def train_step(model, images, labels, optimizer, epoch=None):
    """
    One optimizer update on a batch, applied to the model in place.

    Returns the model and the batch loss measured before the update.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise InvalidInputError("training batch is empty")

    loss, grads = model.batch_loss_grads(images, labels)
    if not np.isfinite(loss):
        raise TrainingDivergenceError(f"non-finite training loss {loss}", epoch)

    params = model.working_parameters()
    if model.arch.train_temperature:
        params["temperature"] = np.float64(model.temperature)
    else:
        grads = {k: v for k, v in grads.items() if k != "temperature"}

    updated = optimizer.update(params, grads)
    temperature = None
    if "temperature" in updated:
        temperature = max(float(updated.pop("temperature")), MIN_TEMPERATURE)
    model.set_parameters(updated, temperature)

    if not model.all_finite():
        raise TrainingDivergenceError("parameters became non-finite", epoch)
    return model, loss


def accuracy(model, dataset):
    """Fraction of samples whose argmax prediction equals the label."""
    if dataset is None or dataset.N == 0:
        return None
    return float(np.mean(model.predict(dataset.images) == dataset.labels))


def train(model, dataset, config, val_clean=None, val_adv=None, callback=None):
    """
    Train a copy of the model with seeded shuffling.

    Returns (trained model, list of EpochRecord). callback(record, model) is
    called after every epoch with the current model.
    """
    if dataset.N == 0:
        raise InvalidInputError("training set is empty")
    if dataset.num_classes != model.num_classes:
        raise InvalidInputError(
            f"dataset has {dataset.num_classes} classes, model has {model.num_classes}"
        )

    model = model.copy()
    optimizer = make_optimizer(config)
    rng = np.random.default_rng(config.seed)
    images, labels = dataset.images, dataset.labels
    records = []

    for epoch in range(config.epochs):
        optimizer.lr = config.lr_at(epoch)
        order = rng.permutation(dataset.N)
        total = 0.0
        for start in range(0, dataset.N, config.batch_size):
            batch = order[start:start + config.batch_size]
            _, loss = train_step(model, images[batch], labels[batch], optimizer, epoch=epoch)
            total += loss * len(batch)

        record = EpochRecord(
            epoch=epoch,
            train_loss=total / dataset.N,
            clean_val_acc=accuracy(model, val_clean),
            adv_val_acc=accuracy(model, val_adv),
        )
        records.append(record)
        log.info(
            "epoch finished",
            epoch=epoch,
            train_loss=round(record.train_loss, 6),
            clean_val_acc=record.clean_val_acc,
            adv_val_acc=record.adv_val_acc,
        )
        if callback is not None:
            callback(record, model)

    return model, records
