"""
Seeded synthetic image generator, the offline stand-in for CIFAR-10.

Class c is drawn as a bar oriented at angle pi*c/k plus a filled disc placed
at class position c around the image centre, over a grey background of random
brightness. Both shapes differ from the background by a low-contrast class
colour, a few times the 8/255 attack budget, so they stay readable after an
attack but do not dominate the decision. Every class also carries a fixed
dense +/- texture below the attack budget, and the whole image gets uniform
noise of amplitude 0.1.
"""

import colorsys

import numpy as np
import structlog

from ..errors import ConfigError
from .dataset import DataSource, LabeledDataset

log = structlog.get_logger()

NOISE_AMPLITUDE = 0.1
SHAPE_CONTRAST = 0.1
TEXTURE_AMPLITUDE = 0.016
TEXTURE_SEED = 20231


def class_palette(k):
    """k evenly spaced, fully saturated RGB colours."""
    return np.array(
        [colorsys.hsv_to_rgb(c / k, 0.85, 0.95) for c in range(k)], dtype=np.float64
    )


def class_textures(k, h, w):
    """Per-class +/-1 patterns of shape (k, 3, h, w); fixed for a given geometry, whatever the data seed."""
    rng = np.random.default_rng([TEXTURE_SEED, k, h, w])
    return rng.integers(0, 2, size=(k, 3, h, w)).astype(np.float64) * 2.0 - 1.0


def _draw(rng, label, k, h, w, palette, textures):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    image = np.empty((3, h, w), dtype=np.float64)
    image[:] = 0.35 + 0.3 * rng.random()
    shift = SHAPE_CONTRAST * (2.0 * palette[label] - 1.0)

    # Oriented bar through a jittered centre
    cy = (h - 1) / 2.0 + rng.uniform(-h / 16.0, h / 16.0)
    cx = (w - 1) / 2.0 + rng.uniform(-w / 16.0, w / 16.0)
    angle = np.pi * label / k
    distance = np.abs((xx - cx) * np.sin(angle) - (yy - cy) * np.cos(angle))
    bar = distance <= max(h, w) / 16.0
    image[:, bar] += shift[:, None]

    # Disc at the class position on a ring, in the opposite colour
    ring = min(h, w) / 4.0
    theta = 2.0 * np.pi * label / k
    dy = (h - 1) / 2.0 + ring * np.sin(theta) + rng.uniform(-1.0, 1.0)
    dx = (w - 1) / 2.0 + ring * np.cos(theta) + rng.uniform(-1.0, 1.0)
    disc = (yy - dy) ** 2 + (xx - dx) ** 2 <= (min(h, w) / 8.0) ** 2
    image[:, disc & ~bar] -= shift[:, None]

    image += TEXTURE_AMPLITUDE * textures[label]
    image += rng.uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE, size=image.shape)
    return np.clip(image, 0.0, 1.0)


def gen_synthetic(seed, n, k, h, w):
    """Generate n deterministic samples over k balanced classes of size 3 x h x w."""
    if k < 2 or n < k:
        raise ConfigError(f"synthetic data needs n >= k >= 2, got n={n}, k={k}")
    if h < 1 or w < 1:
        raise ConfigError(f"image size must be positive, got {h}x{w}")

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % k)
    palette, textures = class_palette(k), class_textures(k, h, w)
    images = np.stack([_draw(rng, int(label), k, h, w, palette, textures) for label in labels])

    log.info("synthetic dataset generated", seed=seed, n=n, k=k, height=h, width=w)
    return LabeledDataset(
        images.astype(np.float32),
        labels,
        np.arange(n),
        [f"class_{c}" for c in range(k)],
        DataSource.SYNTHETIC,
    )
