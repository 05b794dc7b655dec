"""
Linear classifier logits = W x + b over flattened pixels.

Implements the same classifier interface as DualEncoderModel, which lets the
attacks be checked against closed-form answers.
"""

import numpy as np

from ..errors import ShapeError
from .losses import loss_with_grad


class LinearClassifier:
    """Affine logits over the flattened image."""

    def __init__(self, weights, bias, image_shape):
        self.image_shape = tuple(int(d) for d in image_shape)
        self.W = np.array(weights, dtype=np.float64)
        self.b = np.array(bias, dtype=np.float64).reshape(-1)
        d = int(np.prod(self.image_shape))
        if self.W.shape != (self.b.size, d):
            raise ShapeError(f"weights {self.W.shape} do not match {self.b.size} classes x {d} inputs")

    @classmethod
    def binary(cls, w, b, image_shape):
        """Two-class model whose decision function is f(x) = w.x + b (class 1 when positive)."""
        w = np.asarray(w, dtype=np.float64).reshape(-1)
        return cls(np.stack([np.zeros_like(w), w]), [0.0, float(b)], image_shape)

    @property
    def num_classes(self):
        return self.b.size

    def _flat(self, images):
        x = np.asarray(images, dtype=np.float64)
        if x.shape == self.image_shape:
            return x.reshape(1, -1), True
        if x.shape[1:] != self.image_shape:
            raise ShapeError(f"input of shape {x.shape} does not match image shape {self.image_shape}")
        return x.reshape(x.shape[0], -1), False

    def logits(self, images):
        x, single = self._flat(images)
        z = x @ self.W.T + self.b
        return z[0] if single else z

    def predict(self, images):
        x, single = self._flat(images)
        labels = np.argmax(x @ self.W.T + self.b, axis=1)
        return int(labels[0]) if single else labels

    def loss_grad(self, image, label, kind="ce"):
        z = self.logits(image)
        loss, dz = loss_with_grad(z, label, kind)
        return loss, (dz @ self.W).reshape(self.image_shape), z

    def logit_jacobian(self, image):
        return self.logits(image), self.W.reshape((self.num_classes,) + self.image_shape).copy()
