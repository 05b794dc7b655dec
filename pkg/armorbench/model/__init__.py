"""Differentiable dual-encoder classifier, training and checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .dual_encoder import (
    Arch,
    DualEncoderModel,
    encode,
    forward,
    grad_input,
    grad_params,
    init_model,
    logit_jacobian,
    predict,
)
from .linear import LinearClassifier
from .losses import LossKind, dlr_loss, loss_ce, softmax
from .training import EpochRecord, TrainConfig, train, train_step
