"""PSNR / SSIM on the luma channel, kernel error and the stage-weighted L1 loss."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .imgcore import rgb_to_y

__all__ = [
    "MetricReport",
    "psnr",
    "ssim",
    "kernel_l1",
    "image_l1",
    "stage_loss",
    "default_stage_weights",
    "evaluate",
]

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _prepare(a, b, border: int):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        a, b = rgb_to_y(a), rgb_to_y(b)
    if border < 0:
        raise ValueError(f"border must be >= 0, got {border}")
    if border:
        if 2 * border >= min(a.shape):
            raise ValueError(f"border {border} leaves nothing of a {a.shape} image")
        a = a[border:-border, border:-border]
        b = b[border:-border, border:-border]
    return a, b


def psnr(a, b, border: int = 0) -> float:
    """Peak signal-to-noise ratio in dB for images on the [0, 1] scale.

    Colour inputs are reduced to luma first. Returns ``inf`` for identical
    images.
    """
    a, b = _prepare(a, b, border)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gauss_window(size=SSIM_WIN, sigma=SSIM_SIGMA):
    d = np.arange(size) - (size - 1) / 2
    g = np.exp(-d * d / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, w1d):
    n = w1d.size
    h, w = img.shape
    rows = sum(w1d[i] * img[i:h - n + 1 + i] for i in range(n))
    return sum(w1d[j] * rows[:, j:w - n + 1 + j] for j in range(n))


def ssim(a, b, border: int = 0, data_range: float = 1.0) -> float:
    """Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5).

    Local statistics are taken only where the window fits inside the image
    and the SSIM map is averaged over those positions.
    """
    a, b = _prepare(a, b, border)
    if min(a.shape) < SSIM_WIN:
        raise ValueError(f"image {a.shape} is smaller than the {SSIM_WIN}x{SSIM_WIN} window")
    if np.array_equal(a, b):
        return 1.0
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    w = _gauss_window()
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a * mu_a
    var_b = _filter_valid(b * b, w) - mu_b * mu_b
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def kernel_l1(k_est, k_gt) -> float:
    k_est = np.asarray(k_est, dtype=np.float64)
    k_gt = np.asarray(k_gt, dtype=np.float64)
    if k_est.shape != k_gt.shape:
        raise ValueError(f"kernel shapes differ: {k_est.shape} vs {k_gt.shape}")
    return float(np.abs(k_est - k_gt).sum())


def image_l1(x_est, x_gt) -> float:
    x_est = np.asarray(x_est, dtype=np.float64)
    x_gt = np.asarray(x_gt, dtype=np.float64)
    if x_est.shape != x_gt.shape:
        raise ValueError(f"image shapes differ: {x_est.shape} vs {x_gt.shape}")
    return float(np.abs(x_est - x_gt).sum())


def default_stage_weights(T: int) -> np.ndarray:
    """0.1 for every intermediate stage and 1.0 for the last."""
    w = np.full(T, 0.1)
    if T:
        w[-1] = 1.0
    return w


def stage_loss(trace, gt, alpha=None, beta=None) -> float:
    """Weighted sum of per-stage kernel and image L1 errors.

    ``trace`` is a sequence of ``(k_t, x_t)`` for stages ``1..T`` and ``gt``
    the pair ``(k, x)``. Weights default to :func:`default_stage_weights`.
    """
    trace = list(trace)
    T = len(trace)
    alpha = default_stage_weights(T) if alpha is None else np.asarray(alpha, dtype=np.float64)
    beta = default_stage_weights(T) if beta is None else np.asarray(beta, dtype=np.float64)
    if alpha.shape != (T,) or beta.shape != (T,):
        raise ValueError(f"weights must have length {T}, got {alpha.shape} and {beta.shape}")
    k_gt, x_gt = gt
    total = 0.0
    for (k_t, x_t), a_t, b_t in zip(trace, alpha, beta):
        total += a_t * kernel_l1(k_t, k_gt) + b_t * image_l1(x_t, x_gt)
    return float(total)


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    kernel_l1: float | None = None
    stage_loss: float | None = None
    border: int = 0

    FIELDS = ("psnr_db", "ssim", "kernel_l1", "stage_loss", "border")

    def _row(self):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return repr(v) if isinstance(v, float) else str(v)
        return [fmt(getattr(self, f)) for f in self.FIELDS]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.FIELDS)
        writer.writerow(self._row())
        return buf.getvalue()

    def to_json(self) -> str:
        d = asdict(self)
        # JSON has no infinity literal; use the same sentinel as the CSV.
        d = {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}
        return json.dumps(d, indent=2)


def evaluate(sr, gt, border: int = 0, k_est=None, k_gt=None) -> MetricReport:
    """PSNR, SSIM and (when both kernels are given) kernel L1 error."""
    kl1 = kernel_l1(k_est, k_gt) if k_est is not None and k_gt is not None else None
    return MetricReport(psnr_db=psnr(sr, gt, border), ssim=ssim(sr, gt, border),
                        kernel_l1=kl1, border=border)
