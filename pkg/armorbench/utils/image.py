"""
Image helpers for ArmorBench.
Conversions between channel-first [0,1] arrays, PIL images and OpenCV resizing.
"""

import os

import cv2
import numpy as np
from PIL import Image


def to_uint8_hwc(pixels):
    """Convert a 3xHxW [0,1] array into an HxWx3 uint8 array."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 3 or pixels.shape[0] != 3:
        raise ValueError(f"expected a 3xHxW array, got shape {pixels.shape}")
    hwc = np.rint(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)
    return np.ascontiguousarray(hwc)


def to_pil_image(pixels):
    """Convert a 3xHxW [0,1] array into a PIL RGB image."""
    return Image.fromarray(to_uint8_hwc(pixels))


def save_png(pixels, path):
    """Save one image as PNG."""
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    to_pil_image(pixels).save(path, format="PNG")


def resize_chw(pixels, height, width):
    """Resize a 3xHxW image with area interpolation, keeping values in [0,1]."""
    pixels = np.asarray(pixels, dtype=np.float32)
    if pixels.shape[1:] == (height, width):
        return pixels.copy()
    hwc = np.ascontiguousarray(pixels.transpose(1, 2, 0))
    resized = cv2.resize(hwc, (width, height), interpolation=cv2.INTER_AREA)
    return np.clip(resized.transpose(2, 0, 1), 0.0, 1.0).astype(np.float32)


def save_image_grid(rows, path, scale=2, padding=2):
    """
    Save a grid of images as one PNG.

    rows is a list of rows, each a list of 3xHxW arrays of equal size.
    Used to put clean images and their adversarial versions side by side.
    """
    if not rows or not rows[0]:
        raise ValueError("image grid needs at least one image")

    height, width = np.asarray(rows[0][0]).shape[1:]
    cell_h, cell_w = height * scale, width * scale
    n_cols = max(len(row) for row in rows)
    grid = Image.new(
        "RGB",
        (n_cols * (cell_w + padding) + padding, len(rows) * (cell_h + padding) + padding),
        (255, 255, 255),
    )

    for r, row in enumerate(rows):
        for c, pixels in enumerate(row):
            tile = to_pil_image(pixels).resize((cell_w, cell_h), Image.NEAREST)
            grid.paste(tile, (padding + c * (cell_w + padding), padding + r * (cell_h + padding)))

    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    grid.save(path, format="PNG")
