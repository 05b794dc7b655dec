"""
Running attacks over datasets and measuring how often they succeed.
"""

from collections import defaultdict

import numpy as np
import structlog

from ..errors import ConfigError, InvalidInputError
from ..utils.parallel import map_ordered
from .base import ATTACK_KINDS
from .deepfool import deepfool
from .gradient import autoattack_lite, fgsm
from .hybrid import fused_attack, sequential_attack

log = structlog.get_logger()


def attack_sample(model, sample, kinds, config):
    """Every requested attack kind on one sample; fused reuses the base attacks."""
    results = {}

    def base(kind):
        if kind not in results:
            if kind == "fgsm":
                results[kind] = fgsm(model, sample, config.epsilon)
            elif kind == "deepfool":
                results[kind] = deepfool(
                    model, sample, config.deepfool_max_iter, config.deepfool_overshoot
                )
            else:
                results[kind] = autoattack_lite(model, sample, config)
        return results[kind]

    for kind in kinds:
        if kind == "sequential":
            results[kind] = sequential_attack(model, sample, config)
        elif kind == "fused":
            results[kind] = fused_attack(
                model, sample, config, parts=(base("fgsm"), base("deepfool"), base("autoattack"))
            )
        else:
            base(kind)
    return {kind: results[kind] for kind in kinds}


def generate_attacks(model, dataset, kinds, config, threads=1):
    """
    Attack every sample of a dataset with each requested kind.

    Returns {kind: [AdvExample, ...]} in dataset order, whatever the thread count.
    """
    kinds = tuple(kinds)
    unknown = [k for k in kinds if k not in ATTACK_KINDS]
    if unknown:
        raise ConfigError(f"unknown attack kinds {unknown}", "attack.kinds")

    per_sample = map_ordered(
        lambda sample: attack_sample(model, sample, kinds, config), dataset.samples, threads
    )
    results = {kind: [r[kind] for r in per_sample] for kind in kinds}
    for kind, examples in results.items():
        log.info(
            "attack finished",
            kind=kind,
            n=len(examples),
            success=sum(e.success for e in examples),
            mean_linf=round(float(np.mean([e.linf_norm for e in examples])), 6) if examples else 0.0,
        )
    return results


def attack_success_rate(model, adv_set):
    """
    Fraction of adversarial examples the model misclassifies.

    Returns (rate, {kind: rate}) with the breakdown grouped by attack chain.
    Predictions are recomputed with the given model.
    """
    adv_set = list(adv_set)
    if not adv_set:
        raise InvalidInputError("attack success rate of an empty adversarial set")

    predictions = model.predict(np.stack([e.adv_pixels for e in adv_set]))
    fooled = predictions != np.array([e.label for e in adv_set])

    groups = defaultdict(list)
    for example, wrong in zip(adv_set, fooled):
        groups[example.kind].append(bool(wrong))
    breakdown = {kind: float(np.mean(flags)) for kind, flags in sorted(groups.items())}
    return float(np.mean(fooled)), breakdown
