"""Synthetic degradation: Gaussian blur kernels, blur, s-fold decimation, AWGN.

The forward model is ``y = downsample(convolve2d(x, k), s) + n`` with
``n ~ N(0, (sigma_n / 255)^2)`` on the [0, 1] scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Iterator, Union

import numpy as np
from scipy import ndimage

from .imgcore import as_image, as_kernel

__all__ = [
    "Iso",
    "Aniso",
    "DegradationSpec",
    "gaussian_kernel",
    "pad",
    "convolve2d",
    "downsample",
    "add_awgn",
    "degrade",
    "gaussian8",
    "gaussian8_sigmas",
    "setting2_kernels",
    "sample_setting2",
    "BOUNDARIES",
]

BOUNDARIES = ("replicate", "circular", "zero")
_NP_PAD_MODE = {"replicate": "edge", "circular": "wrap", "zero": "constant"}
_NDI_MODE = {"replicate": "nearest", "circular": "grid-wrap", "zero": "constant"}

GAUSSIAN8_RANGES = {2: (0.8, 1.6), 3: (1.35, 2.40), 4: (1.8, 3.2)}
SETTING2_WIDTHS = ((0.8, 1.6), (2.0, 4.0))
SETTING2_ANGLES = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)
SETTING2_KERNEL_SIZE = {2: 11, 3: 15, 4: 21}


@dataclass(frozen=True)
class Iso:
    sigma: float

    def covariance(self) -> np.ndarray:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        return self.sigma ** 2 * np.eye(2)


@dataclass(frozen=True)
class Aniso:
    """Rotated Gaussian with axis widths ``l1``, ``l2`` (std devs) and angle ``theta``."""

    l1: float
    l2: float
    theta: float

    def covariance(self) -> np.ndarray:
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError(f"widths must be positive, got {self.l1}, {self.l2}")
        c, s = np.cos(self.theta), np.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return rot @ np.diag([self.l1 ** 2, self.l2 ** 2]) @ rot.T


KernelParams = Union[Iso, Aniso]


@dataclass(frozen=True)
class DegradationSpec:
    scale: int = 2
    kernel_size: int = 21
    params: KernelParams = field(default_factory=lambda: Iso(1.2))
    noise: float = 0.0
    seed: int = 0
    boundary: str = "replicate"

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {self.kernel_size}")
        if self.noise < 0:
            raise ValueError(f"noise level must be >= 0, got {self.noise}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        self.params.covariance()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = {"kind": type(self.params).__name__.lower(), **asdict(self.params)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationSpec":
        d = dict(d)
        params = dict(d.pop("params"))
        kind = params.pop("kind")
        d["params"] = Iso(**params) if kind == "iso" else Aniso(**params)
        return cls(**d)


def gaussian_kernel(p: int, params: KernelParams) -> np.ndarray:
    """Sampled Gaussian on a ``p x p`` grid centred at ``(p-1)/2``, unit sum."""
    if p < 1 or p % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {p}")
    cov = params.covariance()
    if np.linalg.cond(cov) > 1e14:
        raise ValueError("kernel covariance is singular")
    prec = np.linalg.inv(cov)
    d = np.arange(p) - (p - 1) / 2
    di, dj = np.meshgrid(d, d, indexing="ij")
    q = prec[0, 0] * di * di + 2 * prec[0, 1] * di * dj + prec[1, 1] * dj * dj
    k = np.exp(-0.5 * q)
    return k / k.sum()


def pad(x: np.ndarray, c: int, boundary: str) -> np.ndarray:
    """Extend the two spatial axes of ``x`` by ``c`` pixels on every side."""
    if boundary not in _NP_PAD_MODE:
        raise ValueError(f"unknown boundary {boundary!r}; choose from {BOUNDARIES}")
    widths = [(c, c), (c, c)] + [(0, 0)] * (x.ndim - 2)
    return np.pad(x, widths, mode=_NP_PAD_MODE[boundary])


def _check_kernel_fits(x: np.ndarray, p: int):
    if p > min(x.shape[0], x.shape[1]):
        raise ValueError(f"kernel size {p} exceeds image size {x.shape[:2]}")


def convolve2d(x, k, boundary: str = "replicate") -> np.ndarray:
    """Same-size 2-D convolution (kernel flipped) with boundary extension.

    ``out[i, j] = sum_{a,b} k[a, b] * x[i + c - a, j + c - b]`` where
    ``c = (p - 1) // 2`` and out-of-range indices follow ``boundary``.
    Colour images are filtered channel by channel.
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    _check_kernel_fits(x, k.shape[0])
    if boundary not in _NDI_MODE:
        raise ValueError(f"unknown boundary {boundary!r}; choose from {BOUNDARIES}")
    weights = k if x.ndim == 2 else k[:, :, None]
    return ndimage.convolve(x, weights, mode=_NDI_MODE[boundary], cval=0.0)


def downsample(x, s: int) -> np.ndarray:
    """Keep the upper-left pixel of every ``s x s`` block."""
    x = np.asarray(x)
    if s < 1:
        raise ValueError(f"scale must be >= 1, got {s}")
    if x.shape[0] % s or x.shape[1] % s:
        raise ValueError(f"image dims {x.shape[:2]} are not divisible by {s}")
    return x[::s, ::s].copy()


def add_awgn(x, noise: float, seed) -> np.ndarray:
    """Add i.i.d. Gaussian noise with std ``noise / 255``; no clipping."""
    if noise < 0:
        raise ValueError(f"noise level must be >= 0, got {noise}")
    x = np.asarray(x, dtype=np.float64)
    if noise == 0:
        return x.copy()
    rng = np.random.default_rng(seed)
    return x + rng.standard_normal(x.shape) * (noise / 255.0)


def degrade(x, spec: DegradationSpec):
    """Apply the full forward model; returns ``(y, k)``."""
    x = as_image(x)
    k = gaussian_kernel(spec.kernel_size, spec.params)
    blurred = convolve2d(x, k, spec.boundary)
    y = add_awgn(downsample(blurred, spec.scale), spec.noise, spec.seed)
    return y, k


def gaussian8_sigmas(scale: int) -> np.ndarray:
    if scale not in GAUSSIAN8_RANGES:
        raise ValueError(f"Gaussian8 is defined for scales 2, 3, 4; got {scale}")
    lo, hi = GAUSSIAN8_RANGES[scale]
    return np.linspace(lo, hi, 8)


def gaussian8(scale: int, p: int = 21) -> list:
    """The 8 isotropic test kernels for ``scale``, widths evenly spaced."""
    return [gaussian_kernel(p, Iso(float(sig))) for sig in gaussian8_sigmas(scale)]


def setting2_kernels(scale: int, p: int | None = None) -> list:
    """Anisotropic test grid: 2 width pairs x 4 angles, as ``(Aniso, kernel)``."""
    if p is None:
        p = SETTING2_KERNEL_SIZE.get(scale, 21)
    out = []
    for l1, l2 in SETTING2_WIDTHS:
        for theta in SETTING2_ANGLES:
            params = Aniso(l1, l2, float(theta))
            out.append((params, as_kernel(gaussian_kernel(p, params))))
    return out


def sample_setting2(seed, scale: int = 2, max_noise: float = 25.0) -> Iterator[DegradationSpec]:
    """Endless seeded stream of random anisotropic degradations (training range)."""
    rng = np.random.default_rng(seed)
    p = SETTING2_KERNEL_SIZE.get(scale, 21)
    while True:
        l1, l2 = rng.uniform(0.6, 5.0, size=2)
        theta = rng.uniform(-np.pi, np.pi)
        noise = rng.uniform(0.0, max_noise)
        yield DegradationSpec(scale=scale, kernel_size=p,
                              params=Aniso(float(l1), float(l2), float(theta)),
                              noise=float(noise), seed=int(rng.integers(2 ** 63)))
