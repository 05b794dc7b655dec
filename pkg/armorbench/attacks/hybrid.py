"""
Hybrid attacks built from the base attacks.

sequential_attack chains FGSM -> DeepFool -> APGD inside one epsilon budget.
fuse averages three adversarial images pixel-wise; the average is taken over
the images themselves, not over encoder features.
"""

import numpy as np

from ..errors import ShapeError
from ..model.losses import LossKind
from .base import KIND_CHAINS, check_fuse_weights, make_example, project_linf
from .deepfool import deepfool
from .gradient import apgd, autoattack_lite, fgsm


def sequential_attack(model, sample, config):
    """
    x' = FGSM(x); x'' = DeepFool started at x', projected back into the
    epsilon-ball around x; result = APGD-CE warm-started at x'' with x' as an
    extra candidate.
    """
    x = np.asarray(sample.pixels, dtype=np.float64)
    first = fgsm(model, sample, config.epsilon)
    refined = deepfool(
        model, sample, config.deepfool_max_iter, config.deepfool_overshoot, x_start=first.adv_pixels
    )
    second = project_linf(refined.adv_pixels, x, config.epsilon)
    final = apgd(
        model,
        sample,
        config.epsilon,
        max(config.apgd_iters, 1),
        LossKind.CE,
        seed=[config.seed, int(sample.id)],
        x_init=second,
        candidates=(first.adv_pixels,),
    )
    return make_example(
        model,
        sample,
        final.adv_pixels,
        KIND_CHAINS["sequential"],
        stage="autoattack",
        iterations=first.iterations + refined.iterations + final.iterations,
        loss_trace=final.loss_trace,
    )


def fuse(adv_fgsm, adv_deepfool, adv_autoattack, weights=(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)):
    """
    Pixel-wise weighted average of three images, clipped to [0,1].

    The weighted terms are summed in sorted order per pixel, so permuting the
    images together with their weights gives the identical result. Equal
    weights divide the sorted sum by three.
    """
    weights = check_fuse_weights(weights)
    images = [np.asarray(img, dtype=np.float64) for img in (adv_fgsm, adv_deepfool, adv_autoattack)]
    if not images[0].shape == images[1].shape == images[2].shape:
        raise ShapeError(f"cannot fuse shapes {[img.shape for img in images]}")

    if weights[0] == weights[1] == weights[2]:
        fused = np.sort(np.stack(images), axis=0).sum(axis=0) / 3.0
    else:
        terms = np.stack([w * img for w, img in zip(weights, images)])
        fused = np.sort(terms, axis=0).sum(axis=0)
    return np.clip(fused, 0.0, 1.0)


def fused_attack(model, sample, config, parts=None):
    """
    Fuse standalone FGSM, DeepFool and AutoAttack-lite examples of a sample.

    parts may supply already computed (fgsm, deepfool, autoattack) examples.
    """
    if parts is None:
        parts = (
            fgsm(model, sample, config.epsilon),
            deepfool(model, sample, config.deepfool_max_iter, config.deepfool_overshoot),
            autoattack_lite(model, sample, config),
        )
    pixels = fuse(*(p.adv_pixels for p in parts), weights=config.fuse_weights)
    return make_example(
        model, sample, pixels, KIND_CHAINS["fused"], iterations=sum(p.iterations for p in parts)
    )
