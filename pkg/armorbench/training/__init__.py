"""Adversarial training set construction, fine-tuning and evaluation."""

from .advtrain import (
    AdvTrainConfig,
    EvalReport,
    allocate_mix,
    build_adversarial_dataset,
    evaluate_model,
    retrain,
    write_monitor_log,
)
