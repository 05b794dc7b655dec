"""
Dual-encoder image classifier.

An image encoder (flatten -> dense -> max(0, .) -> dense -> L2 normalize) is
paired with one learnable embedding per class. Logits are the class-embedding
cosine similarities scaled by a temperature:

    z_k = T * cos(encode(x), E_k)

Parameters are held in single precision; forward and backward passes run in
double precision on a float64 mirror of them.
"""

from dataclasses import asdict, dataclass

import numpy as np
import structlog

from ..data.dataset import DEFAULT_MEAN, DEFAULT_STD
from ..errors import ConfigError, ShapeError
from .losses import ce_with_grad, loss_with_grad

log = structlog.get_logger()

PARAM_ORDER = ("W1", "b1", "W2", "b2", "E")
NORM_EPS = 1e-12
DEFAULT_TEMPERATURE = 10.0


@dataclass(frozen=True)
class Arch:
    """Model dimensions and input normalization."""

    image_shape: tuple = (3, 32, 32)
    hidden_dim: int = 128
    embed_dim: int = 64
    num_classes: int = 10
    mean: tuple = DEFAULT_MEAN
    std: tuple = DEFAULT_STD
    train_temperature: bool = False

    def __post_init__(self):
        object.__setattr__(self, "image_shape", tuple(int(d) for d in self.image_shape))
        object.__setattr__(self, "mean", tuple(float(m) for m in self.mean))
        object.__setattr__(self, "std", tuple(float(s) for s in self.std))
        for name in ("hidden_dim", "embed_dim", "num_classes"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"must be >= 1, got {getattr(self, name)}", f"model.{name}")
        if len(self.image_shape) != 3 or min(self.image_shape) < 1:
            raise ConfigError(f"expected positive (C, H, W), got {self.image_shape}", "model.image_shape")
        channels = self.image_shape[0]
        if len(self.mean) != channels or len(self.std) != channels:
            raise ConfigError(f"mean and std need {channels} components", "model.std")
        if min(self.std) <= 0.0:
            raise ConfigError("std components must be strictly positive", "model.std")

    @property
    def input_dim(self):
        c, h, w = self.image_shape
        return c * h * w

    def param_shapes(self):
        """Shape of every parameter, in serialization order."""
        return {
            "W1": (self.input_dim, self.hidden_dim),
            "b1": (self.hidden_dim,),
            "W2": (self.hidden_dim, self.embed_dim),
            "b2": (self.embed_dim,),
            "E": (self.num_classes, self.embed_dim),
        }

    def to_dict(self):
        data = asdict(self)
        for key in ("image_shape", "mean", "std"):
            data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def _normalize_rows_backward(unit, norm, dunit):
    # Gradient of v / max(|v|, eps) with respect to v, row by row
    proj = np.sum(unit * dunit, axis=-1, keepdims=True)
    return np.where(norm > NORM_EPS, (dunit - unit * proj) / norm, dunit / NORM_EPS)


class DualEncoderModel:
    """
    Image encoder plus per-class embeddings.

    The model is read-only for forward, loss and gradient queries, so one
    instance can serve many attack threads at once. Only set_parameters
    mutates it.
    """

    def __init__(self, arch, params, temperature=DEFAULT_TEMPERATURE, seed=0,
                 class_names=None, dtype=np.float32):
        """Validate parameters against the architecture."""
        if not temperature > 0.0:
            raise ConfigError(f"temperature must be positive, got {temperature}", "model.temperature")
        self.arch = arch
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        if class_names is None:
            class_names = [f"class_{k}" for k in range(arch.num_classes)]
        if len(class_names) != arch.num_classes:
            raise ShapeError(f"{len(class_names)} class names for {arch.num_classes} classes")
        self.class_names = tuple(str(name) for name in class_names)
        self.set_parameters(params, temperature)

    def set_parameters(self, params, temperature=None):
        """Replace parameters (and optionally the temperature)."""
        shapes = self.arch.param_shapes()
        stored = {}
        for name in PARAM_ORDER:
            value = np.array(params[name], dtype=self.dtype)
            if value.shape != shapes[name]:
                raise ShapeError(f"parameter {name} has shape {value.shape}, expected {shapes[name]}")
            stored[name] = value
        self.params = stored
        self._p64 = {name: value.astype(np.float64) for name, value in stored.items()}
        if temperature is not None:
            self.temperature = float(temperature)
        # mean and std laid out like a flattened C x H x W image
        c, h, w = self.arch.image_shape
        self._mean = np.repeat(np.asarray(self.arch.mean, dtype=np.float64), h * w)
        self._std = np.repeat(np.asarray(self.arch.std, dtype=np.float64), h * w)

    def working_parameters(self):
        """Double-precision view of the parameters used by forward and backward."""
        return dict(self._p64)

    @property
    def num_classes(self):
        return self.arch.num_classes

    @property
    def image_shape(self):
        return self.arch.image_shape

    @property
    def parameter_count(self):
        return int(sum(p.size for p in self.params.values()))

    def copy(self):
        return DualEncoderModel(
            self.arch, self.params, self.temperature, self.seed, self.class_names, self.dtype
        )

    def astype(self, dtype):
        """Copy of the model holding parameters in another precision."""
        return DualEncoderModel(
            self.arch, self.params, self.temperature, self.seed, self.class_names, dtype
        )

    def all_finite(self):
        return bool(
            np.isfinite(self.temperature)
            and all(np.all(np.isfinite(p)) for p in self.params.values())
        )

    def _as_batch(self, images):
        x = np.asarray(images, dtype=np.float64)
        d = self.arch.input_dim
        if x.shape == self.image_shape or x.shape == (d,):
            return x.reshape(1, d), True
        if x.ndim >= 2 and x.shape[1:] in (self.image_shape, (d,)):
            return x.reshape(x.shape[0], d), False
        raise ShapeError(f"input of shape {x.shape} does not match image shape {self.image_shape}")

    def _forward(self, x):
        p = self._p64
        xn = (x - self._mean) / self._std
        h = xn @ p["W1"] + p["b1"]
        a = np.maximum(h, 0.0)
        e = a @ p["W2"] + p["b2"]
        e_norm = np.maximum(np.linalg.norm(e, axis=1, keepdims=True), NORM_EPS)
        u = e / e_norm
        c_norm = np.maximum(np.linalg.norm(p["E"], axis=1, keepdims=True), NORM_EPS)
        c = p["E"] / c_norm
        s = u @ c.T
        cache = {"xn": xn, "h": h, "a": a, "e_norm": e_norm, "u": u, "c": c, "c_norm": c_norm, "s": s}
        return self.temperature * s, cache

    def _backward(self, cache, dz, with_params=True):
        """
        Backpropagate d(loss)/d(logits).

        dz rows either match the cache rows, or the cache holds a single row
        and every dz row is an upstream vector for that one input.
        """
        p = self._p64
        ds = self.temperature * dz
        du = ds @ cache["c"]
        de = _normalize_rows_backward(cache["u"], cache["e_norm"], du)
        da = de @ p["W2"].T
        dh = da * (cache["h"] > 0.0)
        dx = (dh @ p["W1"].T) / self._std
        if not with_params:
            return dx, None

        dc = ds.T @ cache["u"]
        grads = {
            "W1": cache["xn"].T @ dh,
            "b1": dh.sum(axis=0),
            "W2": cache["a"].T @ de,
            "b2": de.sum(axis=0),
            "E": _normalize_rows_backward(cache["c"], cache["c_norm"], dc),
            "temperature": float(np.sum(dz * cache["s"])),
        }
        return dx, grads

    def logits(self, images):
        """Logits for one image (K,) or a batch (N, K)."""
        x, single = self._as_batch(images)
        z, _ = self._forward(x)
        return z[0] if single else z

    def encode(self, images):
        """L2-normalized image embeddings, (E,) or (N, E)."""
        x, single = self._as_batch(images)
        _, cache = self._forward(x)
        return cache["u"][0] if single else cache["u"]

    def predict(self, images):
        """Argmax labels; ties go to the lowest class index."""
        x, single = self._as_batch(images)
        z, _ = self._forward(x)
        labels = np.argmax(z, axis=1)
        return int(labels[0]) if single else labels

    def vjp(self, image, dlogits):
        """Vector-Jacobian product: d(dlogits . z)/d(image)."""
        x, _ = self._as_batch(image)
        _, cache = self._forward(x)
        dx, _ = self._backward(cache, np.asarray(dlogits, dtype=np.float64).reshape(1, -1), False)
        return dx.reshape(self.image_shape)

    def loss_grad(self, image, label, kind="ce"):
        """Loss of one image, its gradient with respect to the pixels, and the logits."""
        x, _ = self._as_batch(image)
        z, cache = self._forward(x)
        loss, dz = loss_with_grad(z[0], label, kind)
        dx, _ = self._backward(cache, dz.reshape(1, -1), False)
        return loss, dx.reshape(self.image_shape), z[0]

    def logit_jacobian(self, image):
        """Logits (K,) and the K x C x H x W Jacobian of every logit."""
        x, _ = self._as_batch(image)
        z, cache = self._forward(x)
        jac, _ = self._backward(cache, np.eye(self.num_classes), False)
        return z[0], jac.reshape((self.num_classes,) + self.image_shape)

    def batch_loss_grads(self, images, labels):
        """Mean cross-entropy over a batch and its parameter gradients."""
        x, _ = self._as_batch(images)
        z, cache = self._forward(x)
        losses, dz = ce_with_grad(z, labels)
        n = x.shape[0]
        _, grads = self._backward(cache, dz / n, True)
        return float(losses.mean()), grads

    def __repr__(self):
        a = self.arch
        return (
            f"DualEncoderModel(input={a.input_dim}, hidden={a.hidden_dim}, "
            f"embed={a.embed_dim}, K={a.num_classes}, T={self.temperature:g})"
        )


def init_model(arch, seed, class_names=None, temperature=DEFAULT_TEMPERATURE):
    """
    Seeded initialization.

    Every weight matrix is drawn from uniform(-a, a) with
    a = sqrt(6 / (fan_in + fan_out)); biases start at zero.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in arch.param_shapes().items():
        if len(shape) == 2:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            params[name] = np.zeros(shape)
    model = DualEncoderModel(arch, params, temperature, seed, class_names)
    log.debug("model initialized", seed=seed, parameters=model.parameter_count)
    return model


def forward(model, image):
    """Logits of one image or a batch."""
    return model.logits(image)


def encode(model, images):
    """L2-normalized embeddings."""
    return model.encode(images)


def predict(model, images):
    """Argmax class of one image or a batch."""
    return model.predict(images)


def grad_input(model, image, label, loss_kind="ce"):
    """Exact gradient of the chosen loss with respect to the input pixels."""
    _, grad, _ = model.loss_grad(image, label, loss_kind)
    return grad


def grad_params(model, images, labels):
    """Mean batch cross-entropy and its gradient for every parameter."""
    return model.batch_loss_grads(images, labels)


def logit_jacobian(model, image):
    """Logits and the full logit-to-pixel Jacobian of one image."""
    return model.logit_jacobian(image)
