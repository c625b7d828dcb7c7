"""Deterministic synthetic imagery: a reference photo-like scene for
reconstruction experiments and a 10-class oriented-texture set for the
linear probe.

Texture classes differ by spectral band and pattern family while every
sample carries a random global orientation and phase, so orientation is a
nuisance variable the classifier must become invariant to.  All patterns
are built from integer wave vectors or circular convolutions and are
therefore exactly periodic.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.fft as _fft

from .errors import InvalidInputError
from .fileio import read_image
from .grid import ColorSpace, ImageGrid

N_TEXTURE_CLASSES = 10


def _unit_range(img: np.ndarray) -> np.ndarray:
    lo, hi = img.min(), img.max()
    if hi - lo < 1e-9:
        return np.full_like(img, 0.5)
    return (img - lo) / (hi - lo)


def _band_noise(rng, n, radius, width) -> np.ndarray:
    """White noise filtered to an isotropic frequency ring (cycles/image)."""
    spec = _fft.fft2(rng.standard_normal((n, n)))
    f = _fft.fftfreq(n) * n
    r = np.hypot(*np.meshgrid(f, f, indexing="ij"))
    mask = np.exp(-0.5 * ((r - radius) / width) ** 2)
    return _fft.ifft2(spec * mask).real


def _integer_wavevector(rng, radius) -> tuple[int, int]:
    theta = rng.uniform(0.0, np.pi)
    kx = int(round(radius * np.cos(theta)))
    ky = int(round(radius * np.sin(theta)))
    if kx == 0 and ky == 0:
        kx = max(1, int(round(radius)))
    return kx, ky


def _grating(rng, n, radius) -> np.ndarray:
    kx, ky = _integer_wavevector(rng, radius)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    yy, xx = np.mgrid[0:n, 0:n]
    return np.sin(2.0 * np.pi * (kx * xx + ky * yy) / n + phase)

def _plaid(rng, n, radius) -> np.ndarray:
    kx, ky = _integer_wavevector(rng, radius)
    phase1 = rng.uniform(0.0, 2.0 * np.pi)
    phase2 = rng.uniform(0.0, 2.0 * np.pi)
    yy, xx = np.mgrid[0:n, 0:n]
    a = np.sin(2.0 * np.pi * (kx * xx + ky * yy) / n + phase1)
    b = np.sin(2.0 * np.pi * (-ky * xx + kx * yy) / n + phase2)
    return a + b


def _blobs(rng, n, count, sigma) -> np.ndarray:
    impulses = np.zeros((n, n))
    ys = rng.integers(0, n, count)
    xs = rng.integers(0, n, count)
    impulses[ys, xs] = rng.uniform(0.5, 1.0, count)
    f = _fft.fftfreq(n) * n
    r2 = np.add.outer(f**2, f**2)
    kernel = np.exp(-2.0 * (np.pi * sigma / n) ** 2 * r2)  # periodic Gaussian blur
    return _fft.ifft2(_fft.fft2(impulses) * kernel).real


def _texture_sample(rng, cls: int, n: int) -> np.ndarray:
    if cls == 0:
        img = _band_noise(rng, n, radius=2.0, width=1.0)
    elif cls == 1:
        img = _band_noise(rng, n, radius=5.0, width=1.5)
    elif cls == 2:
        img = _band_noise(rng, n, radius=10.0, width=2.5)
    elif cls == 3:
        img = _grating(rng, n, radius=2.0)
    elif cls == 4:
        img = _grating(rng, n, radius=5.0)
    elif cls == 5:
        img = _grating(rng, n, radius=10.0)
    elif cls == 6:
        img = _plaid(rng, n, radius=3.0)
    elif cls == 7:
        img = _plaid(rng, n, radius=7.0)
    elif cls == 8:
        img = _blobs(rng, n, count=max(3, n // 10), sigma=n / 16.0)
    elif cls == 9:
        img = _band_noise(rng, n, radius=0.8, width=0.6)  # smooth cloud
    else:
        raise InvalidInputError(f"unknown texture class {cls}")
    img = _unit_range(img)
    img += rng.normal(0.0, 0.01, img.shape)
    return np.clip(img, 0.0, 1.0)


def texture_dataset(
    n_per_class: int,
    size: int = 32,
    seed: int = 0,
) -> tuple[list[ImageGrid], np.ndarray]:
    """Grayscale oriented-texture samples with labels 0..9, deterministic
    for a given seed."""
    rng = np.random.default_rng(seed)
    images: list[ImageGrid] = []
    labels: list[int] = []
    for cls in range(N_TEXTURE_CLASSES):
        for _ in range(n_per_class):
            arr = _texture_sample(rng, cls, size).astype(np.float32)[None]
            images.append(ImageGrid(arr, ColorSpace.GRAY))
            labels.append(cls)
    return images, np.array(labels)


def reference_image(size: int = 256) -> ImageGrid:
    """Deterministic photo-like RGB test scene: smooth sky, textured
    ground, a sun disc, and a few colored shapes."""
    n = size
    rng = np.random.default_rng(20240515)
    yy, xx = np.mgrid[0:n, 0:n] / n

    sky_top = np.array([0.35, 0.55, 0.85])
    sky_bot = np.array([0.75, 0.85, 0.95])
    img = sky_top[:, None, None] * (1 - yy) + sky_bot[:, None, None] * yy

    # sun disc with a soft edge
    sun = np.exp(-(((xx - 0.72) ** 2 + (yy - 0.22) ** 2) / 0.004))
    img += np.array([0.85, 0.65, 0.25])[:, None, None] * sun

    # rolling ground with band-limited texture
    horizon = 0.62 + 0.05 * np.sin(2 * np.pi * 2 * xx) * np.cos(2 * np.pi * xx)
    ground = 1.0 / (1.0 + np.exp(-(yy - horizon) * 60.0))
    grass = 0.5 + 0.5 * _unit_range(_band_noise(rng, n, radius=12.0, width=4.0))
    fine = 0.5 + 0.5 * _unit_range(_band_noise(rng, n, radius=30.0, width=8.0))
    ground_color = (
        np.array([0.20, 0.45, 0.18])[:, None, None] * grass
        + np.array([0.10, 0.25, 0.08])[:, None, None] * fine * 0.5
    )
    img = img * (1 - ground) + ground_color * ground

    # a house-like block and a tree blob
    house = ((xx > 0.15) & (xx < 0.35) & (yy > 0.45) & (yy < 0.65)).astype(float)
    house = _fft.ifft2(
        _fft.fft2(house) * np.exp(-0.5 * (np.hypot(*np.meshgrid(_fft.fftfreq(n) * n,
                                                                _fft.fftfreq(n) * n,
                                                                indexing="ij")) / 40.0) ** 2)
    ).real
    img += np.array([0.45, 0.15, 0.10])[:, None, None] * house
    tree = np.exp(-(((xx - 0.55) ** 2) / 0.003 + ((yy - 0.52) ** 2) / 0.008))
    img += np.array([0.05, 0.30, 0.05])[:, None, None] * tree

    img = np.clip(img, 0.02, 0.98)
    return ImageGrid(img.astype(np.float32), ColorSpace.RGB)


def load_image_folder(root) -> tuple[list[ImageGrid], np.ndarray, list[str]]:
    """Dataset folder convention: one subdirectory per class, images inside."""
    root = Path(root)
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise InvalidInputError(f"no class subdirectories under {root}")
    images: list[ImageGrid] = []
    labels: list[int] = []
    for label, d in enumerate(class_dirs):
        for f in sorted(d.iterdir()):
            if f.suffix.lower() in (".png", ".pgm", ".ppm", ".rawf"):
                images.append(read_image(f))
                labels.append(label)
    if not images:
        raise InvalidInputError(f"no images found under {root}")
    return images, np.array(labels), [d.name for d in class_dirs]
