"""Procedural grayscale test images, so benchmarks and tests need no downloads."""

from __future__ import annotations

import numpy as np

__all__ = ["shapes", "zone_plate", "bars", "builtin_charts"]


def shapes(size: int = 64, seed=0, n: int = 12) -> np.ndarray:
    """Random overlapping discs and rectangles on a smooth gradient."""
    rng = np.random.default_rng(seed)
    ii, jj = np.mgrid[0:size, 0:size] / size
    img = 0.3 + 0.4 * (rng.uniform(-0.5, 0.5) * ii + rng.uniform(-0.5, 0.5) * jj)
    for _ in range(n):
        val = rng.uniform(0.05, 0.95)
        ci, cj = rng.uniform(0, 1, size=2)
        if rng.random() < 0.5:
            r = rng.uniform(0.05, 0.25)
            mask = (ii - ci) ** 2 + (jj - cj) ** 2 < r * r
        else:
            hi, hj = rng.uniform(0.04, 0.2, size=2)
            mask = (np.abs(ii - ci) < hi) & (np.abs(jj - cj) < hj)
        img = np.where(mask, val, img)
    return np.clip(img, 0.0, 1.0)


def zone_plate(size: int = 64, max_freq: float = 0.35) -> np.ndarray:
    """Radial chirp whose local frequency rises to ``max_freq`` cycles/pixel at the corner."""
    c = (size - 1) / 2
    ii, jj = np.mgrid[0:size, 0:size] - c
    r2 = ii * ii + jj * jj
    return 0.5 + 0.4 * np.cos(np.pi * max_freq * r2 / (np.sqrt(2) * c))


def bars(size: int = 64, period: int = 8) -> np.ndarray:
    """Square-wave bars, horizontal in the top half and vertical in the bottom."""
    idx = np.arange(size)
    wave = ((idx // (period // 2)) % 2).astype(float) * 0.6 + 0.2
    img = np.empty((size, size))
    img[: size // 2] = wave[None, :]
    img[size // 2:] = wave[: size - size // 2, None]
    return img


def builtin_charts(size: int = 64) -> dict:
    """Named set of charts used by the benchmark when no image directory is given."""
    return {
        "shapes0": shapes(size, seed=0),
        "shapes1": shapes(size, seed=1),
        "zoneplate": zone_plate(size),
        "bars": bars(size),
    }
