"""
Gradient-sign attacks: FGSM, APGD and the AutoAttack-lite ensemble.

APGD runs momentum projected gradient ascent inside the epsilon-ball. The step
size starts at 2*epsilon; at checkpoint iterations it is halved, and the
search restarts from the best point, when the loss oscillated or did not
improve since the previous checkpoint.
"""

from dataclasses import replace

import numpy as np
import structlog

from ..errors import ConfigError
from ..model.losses import LossKind, loss_ce
from .base import check_finite, make_example, project_linf

log = structlog.get_logger()

MOMENTUM = 0.75
OSCILLATION_RATIO = 0.75
FIRST_CHECKPOINT = 0.22
MIN_CHECKPOINT_GAP = 0.06
CHECKPOINT_DECREASE = 0.03


def fgsm(model, sample, epsilon):
    """x' = clip(x + epsilon * sign(grad_x CE)), with sign(0) = 0."""
    if epsilon < 0.0:
        raise ConfigError(f"epsilon must be >= 0, got {epsilon}", "attack.epsilon")
    x = np.asarray(sample.pixels, dtype=np.float64)
    _, grad, _ = model.loss_grad(x, sample.label, LossKind.CE)
    check_finite(grad, sample.id)
    adv = np.clip(x + epsilon * np.sign(grad), 0.0, 1.0)
    return make_example(model, sample, adv, ("fgsm",), iterations=1)


def _checkpoint_schedule(iters):
    first = max(int(FIRST_CHECKPOINT * iters), 1)
    minimum = max(int(MIN_CHECKPOINT_GAP * iters), 1)
    decrease = max(int(CHECKPOINT_DECREASE * iters), 1)
    return first, minimum, decrease


def _oscillating(losses, k):
    # fewer than ratio * k increases over the last k steps
    j = len(losses) - 1
    increases = sum(1 for c in range(k) if j - c - 1 >= 0 and losses[j - c] > losses[j - c - 1])
    return increases <= k * OSCILLATION_RATIO


class _BestPoint:
    """Keeps the preferred iterate: misclassified first, then higher loss."""

    def __init__(self):
        self.x = None
        self.key = None

    def offer(self, x, loss, misclassified):
        key = (bool(misclassified), loss)
        if self.key is None or key > self.key:
            self.x, self.key = x, key


def apgd(model, sample, epsilon, iters, loss_kind=LossKind.CE, seed=0, x_init=None,
         candidates=(), random_start=False):
    """
    Momentum projected gradient ascent on the chosen loss inside the epsilon-ball.

    From a clean start the first iterate is the FGSM point and the clean image
    itself is not a candidate. x_init warm-starts the search; candidates are
    extra points evaluated before the first step. The returned example carries
    the best-loss trace in loss_trace.
    """
    if iters < 1:
        raise ConfigError(f"apgd needs at least one iteration, got {iters}", "attack.apgd_iters")
    loss_kind = LossKind(loss_kind)
    x = np.asarray(sample.pixels, dtype=np.float64)
    y = sample.label
    rng = np.random.default_rng(seed)

    def evaluate(point):
        loss, grad, logits = model.loss_grad(point, y, loss_kind)
        check_finite(grad, sample.id)
        check_finite(loss, sample.id, "loss")
        return loss, grad, int(np.argmax(logits)) != y

    best = _BestPoint()
    loss_best = -np.inf
    x_best = grad_best = None
    trace = []

    for point in candidates:
        point = project_linf(point, x, epsilon)
        loss, grad, wrong = evaluate(point)
        best.offer(point, loss, wrong)
        if loss > loss_best:
            x_best, grad_best, loss_best = point, grad, loss

    if x_init is not None:
        x_adv = project_linf(x_init, x, epsilon)
    elif random_start:
        x_adv = project_linf(x + epsilon * rng.uniform(-1.0, 1.0, size=x.shape), x, epsilon)
    else:
        x_adv = x.copy()
    loss, grad, wrong = evaluate(x_adv)
    if x_init is not None or random_start:
        best.offer(x_adv, loss, wrong)
        if loss > loss_best:
            x_best, grad_best, loss_best = x_adv, grad, loss
    if np.isfinite(loss_best):
        trace.append(loss_best)

    step = 2.0 * epsilon
    k, k_min, k_decrease = _checkpoint_schedule(iters)
    counter = 0
    loss_best_last_check = loss_best
    reduced_last_check = True
    losses = []
    x_old = x_adv

    for i in range(iters):
        velocity = x_adv - x_old
        x_old = x_adv
        a = MOMENTUM if i > 0 else 1.0
        z = project_linf(x_adv + step * np.sign(grad), x, epsilon)
        x_adv = project_linf(x_adv + (z - x_adv) * a + velocity * (1.0 - a), x, epsilon)

        loss, grad, wrong = evaluate(x_adv)
        losses.append(loss)
        best.offer(x_adv, loss, wrong)
        if loss > loss_best:
            x_best, grad_best, loss_best = x_adv, grad, loss
        trace.append(loss_best)

        counter += 1
        if counter == k:
            stalled = (not reduced_last_check) and loss_best_last_check >= loss_best
            reduce = _oscillating(losses, k) or stalled
            reduced_last_check = reduce
            loss_best_last_check = loss_best
            if reduce:
                step /= 2.0
                x_adv, grad = x_best, grad_best
            k = max(k - k_decrease, k_min)
            counter = 0

    stage = f"apgd-{loss_kind.value}"
    return make_example(model, sample, best.x, ("apgd",), stage=stage, iterations=iters, loss_trace=trace)


def autoattack_lite(model, sample, config):
    """
    APGD-CE (one FGSM-seeded run, then apgd_restarts random starts) followed by
    dlr_restarts APGD-DLR runs.

    Returns the first successful example, otherwise the one with the highest
    cross-entropy loss. stage names the winning run.
    """
    if config.dlr_restarts > 0 and model.num_classes < 3:
        raise ConfigError(
            f"DLR stage needs at least 3 classes, model has {model.num_classes}", "attack.dlr_restarts"
        )
    iters = max(config.apgd_iters, 1)
    runs = [(LossKind.CE, False)] + [(LossKind.CE, True)] * config.apgd_restarts
    runs += [(LossKind.DLR, r > 0) for r in range(config.dlr_restarts)]

    best, best_loss, total = None, -np.inf, 0
    for index, (kind, random_start) in enumerate(runs):
        result = apgd(
            model,
            sample,
            config.epsilon,
            iters,
            kind,
            seed=[config.seed, int(sample.id), index],
            random_start=random_start,
        )
        total += result.iterations
        if result.success:
            return replace(result, chain=("autoattack",), iterations=total)
        ce = loss_ce(model.logits(result.adv_pixels), sample.label)
        if ce > best_loss:
            best, best_loss = result, ce

    return replace(best, chain=("autoattack",), iterations=total)
