"""
DeepFool: iterated minimal steps to the nearest linearized decision boundary.
"""

import numpy as np

from ..errors import DegenerateGeometryError, ShapeError
from .base import check_finite, make_example

DEGENERATE_NORM = 1e-12


def deepfool(model, sample, max_iter, overshoot, x_start=None):
    """
    Multiclass DeepFool.

    Each step moves towards the class l minimizing |z_l - z_y| / |w_l - w_y|
    by r = |z_l - z_y| / |w_l - w_y|^2 * (w_l - w_y). The iterate is always
    x_start + (1 + overshoot) * (sum of steps), clipped to [0,1]. Stops once
    the prediction leaves the true label or after max_iter steps.
    """
    x = np.asarray(sample.pixels, dtype=np.float64)
    y = int(sample.label)
    origin = x if x_start is None else np.asarray(x_start, dtype=np.float64)
    if origin.shape != x.shape:
        raise ShapeError(f"start point shape {origin.shape} does not match {x.shape}")

    r_total = np.zeros_like(origin)
    x_adv = origin.copy()
    z = model.logits(x_adv)
    iterations = 0

    while int(np.argmax(z)) == y and iterations < max_iter:
        z, jac = model.logit_jacobian(x_adv)
        check_finite(jac, sample.id, "logit jacobian")
        k = z.size
        w = (jac - jac[y]).reshape(k, -1)
        f = z - z[y]
        norms = np.linalg.norm(w, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            distance = np.where(norms >= DEGENERATE_NORM, np.abs(f) / norms, np.inf)
        distance[y] = np.inf

        target = int(np.argmin(distance))
        if norms[target] < DEGENERATE_NORM:
            raise DegenerateGeometryError(
                f"logit gradients of classes {target} and {y} coincide", sample.id
            )

        r_total += (np.abs(f[target]) / norms[target] ** 2 * w[target]).reshape(x.shape)
        x_adv = np.clip(origin + (1.0 + overshoot) * r_total, 0.0, 1.0)
        iterations += 1
        z = model.logits(x_adv)

    return make_example(model, sample, x_adv, ("deepfool",), iterations=iterations)
