"""Seeded synthetic test images and feature maps.

Images mix a smooth Gaussian random background with a Gaussian or Laplacian
texture whose amplitude varies slowly across the frame.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .imageio import ImageBuffer

__all__ = ["synthetic_image", "synthetic_corpus", "smooth_test_image", "gaussian_features", "laplacian_features"]


def _smooth_field(rng, h, w, sigma):
    f = gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap")
    return f / (f.std() + 1e-12)


def synthetic_image(seed: int, height: int = 64, width: int = 64, kind: str = "laplacian",
                    channels: int = 1, texture: float = 28.0) -> ImageBuffer:
    rng = np.random.default_rng(seed)
    planes = []
    envelope = 0.35 + 0.65 * (1 + np.tanh(_smooth_field(rng, height, width, height / 6))) / 2
    background = 128 + 35 * _smooth_field(rng, height, width, height / 8)
    for _ in range(channels):
        if kind == "laplacian":
            noise = rng.laplace(size=(height, width)) / np.sqrt(2)
        elif kind == "gaussian":
            noise = rng.standard_normal((height, width))
        else:
            raise ValueError(f"unknown texture kind {kind!r}")
        tex = gaussian_filter(noise, 0.8, mode="wrap")
        tex /= tex.std() + 1e-12
        planes.append(background + texture * envelope * tex)
    # soft limiter keeps values off the 0 / 255 rails
    v = np.stack(planes, axis=2) - 128
    px = np.clip(np.rint(128 + 120 * np.tanh(v / 120)), 0, 255).astype(np.uint8)
    return ImageBuffer(px)


def synthetic_corpus(count: int = 20, seed: int = 0, height: int = 64, width: int = 64,
                     channels: int = 1) -> list:
    """Alternating Gaussian / Laplacian textured images, image i seeded by (seed, i)."""
    seeds = np.random.SeedSequence(seed).generate_state(count)
    kinds = ("gaussian", "laplacian")
    return [synthetic_image(int(s), height, width, kinds[i % 2], channels)
            for i, s in enumerate(seeds)]


def smooth_test_image() -> ImageBuffer:
    """The bundled 256x256 low-texture grayscale test image (data/smooth256.pgm)."""
    return synthetic_image(256, 256, 256, "gaussian", texture=6.0)


def gaussian_features(shape, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    return scale * np.random.default_rng(seed).standard_normal(shape)


def laplacian_features(shape, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    return scale * np.random.default_rng(seed).laplace(size=shape)
