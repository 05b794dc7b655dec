"""
Attack configuration, adversarial example records and the L-infinity projection.

Every attack takes a classifier exposing logits / predict / loss_grad /
logit_jacobian (DualEncoderModel or LinearClassifier) and an ImageSample, and
returns an AdvExample whose success flag comes from a fresh forward pass.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import AttackFailureError, ConfigError, InvalidInputError, ShapeError

# Attack chains recorded on each kind of example
KIND_CHAINS = {
    "fgsm": ("fgsm",),
    "deepfool": ("deepfool",),
    "autoattack": ("autoattack",),
    "sequential": ("fgsm", "deepfool", "autoattack"),
    "fused": ("fuse",),
}
ATTACK_KINDS = tuple(KIND_CHAINS)


@dataclass(frozen=True)
class AttackConfig:
    """Budgets and iteration counts shared by all attacks."""

    epsilon: float = 8.0 / 255.0
    apgd_iters: int = 50
    apgd_restarts: int = 2
    dlr_restarts: int = 1
    deepfool_max_iter: int = 50
    deepfool_overshoot: float = 0.02
    fuse_weights: tuple = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fuse_weights", tuple(float(w) for w in self.fuse_weights))
        if not self.epsilon >= 0.0:
            raise ConfigError(f"must be >= 0, got {self.epsilon}", "attack.epsilon")
        for name in ("apgd_iters", "apgd_restarts", "dlr_restarts", "deepfool_max_iter"):
            if getattr(self, name) < 0:
                raise ConfigError(f"must be >= 0, got {getattr(self, name)}", f"attack.{name}")
        if self.deepfool_overshoot < 0.0:
            raise ConfigError(f"must be >= 0, got {self.deepfool_overshoot}", "attack.deepfool_overshoot")
        check_fuse_weights(self.fuse_weights)

    def to_dict(self):
        data = asdict(self)
        data["fuse_weights"] = list(self.fuse_weights)
        return data


def check_fuse_weights(weights):
    """Three nonnegative weights summing to 1 within 1e-9."""
    weights = tuple(float(w) for w in weights)
    if len(weights) != 3 or min(weights) < 0.0 or abs(sum(weights) - 1.0) > 1e-9:
        raise ConfigError(
            f"fusion needs 3 nonnegative weights summing to 1, got {weights}", "attack.fuse_weights"
        )
    return weights


@dataclass(frozen=True)
class AdvExample:
    """An adversarial image and where it came from."""

    original_id: int
    label: int
    adv_pixels: np.ndarray
    chain: tuple
    linf_norm: float
    l2_norm: float
    success: bool
    predicted_label: int
    stage: str = ""
    iterations: int = 0
    loss_trace: tuple = field(default=(), repr=False)

    def __post_init__(self):
        pixels = np.asarray(self.adv_pixels)
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise InvalidInputError(f"sample {self.original_id}: adversarial pixels leave [0,1]")

    @property
    def kind(self):
        """Attack kind name of the chain, or the joined chain when it is not a standard one."""
        for kind, chain in KIND_CHAINS.items():
            if chain == tuple(self.chain):
                return kind
        return "+".join(self.chain)


def project_linf(x, x0, epsilon):
    """Clamp x into [x0 - epsilon, x0 + epsilon], then into [0,1]."""
    x = np.asarray(x, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x.shape != x0.shape:
        raise ShapeError(f"cannot project shape {x.shape} around shape {x0.shape}")
    return np.clip(np.clip(x, x0 - epsilon, x0 + epsilon), 0.0, 1.0)


def check_finite(values, sample_id, what="gradient"):
    if not np.all(np.isfinite(values)):
        raise AttackFailureError(f"non-finite {what}", sample_id)


def make_example(model, sample, adv_pixels, chain, stage="", iterations=0, loss_trace=()):
    """Build an AdvExample, measuring norms and re-running the model on the result."""
    adv = np.clip(np.asarray(adv_pixels, dtype=np.float64), 0.0, 1.0)
    check_finite(adv, sample.id, "adversarial image")
    delta = (adv - np.asarray(sample.pixels, dtype=np.float64)).reshape(-1)
    predicted = int(model.predict(adv))
    return AdvExample(
        original_id=int(sample.id),
        label=int(sample.label),
        adv_pixels=adv,
        chain=tuple(chain),
        linf_norm=float(np.abs(delta).max()) if delta.size else 0.0,
        l2_norm=float(np.linalg.norm(delta)),
        success=predicted != int(sample.label),
        predicted_label=predicted,
        stage=stage or chain[-1],
        iterations=int(iterations),
        loss_trace=tuple(float(v) for v in loss_trace),
    )
