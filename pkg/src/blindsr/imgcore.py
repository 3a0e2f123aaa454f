"""Image and kernel containers, colour conversion, bicubic resampling and file I/O.

Images are float64 numpy arrays of shape ``(H, W)`` or ``(H, W, 3)`` with
samples in the working range [0, 1]. Kernels are ``(p, p)`` float64 arrays
with odd ``p``, non-negative entries and unit sum. Conversion to and from
8-bit happens only at the file boundary.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image as _PILImage

__all__ = [
    "ImageFormatError",
    "KernelFormatError",
    "as_image",
    "as_kernel",
    "load_image",
    "save_image",
    "rgb_to_y",
    "bicubic_resize",
    "cubic_weight",
    "read_kernel",
    "write_kernel",
    "center_crop",
]

KERNEL_SUM_TOL = 1e-9
KERNEL_READ_TOL = 1e-6


class ImageFormatError(ValueError):
    """Raised for image files with an unsupported mode or bit depth."""


class KernelFormatError(ValueError):
    """Raised for malformed or infeasible kernel text files."""


def as_image(x) -> np.ndarray:
    """Validate and return ``x`` as a float64 image array."""
    img = np.asarray(x, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise ValueError(f"image must have shape (H, W) or (H, W, 3), got {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image must be non-empty, got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite samples")
    return img


def as_kernel(k, tol: float = KERNEL_SUM_TOL) -> np.ndarray:
    """Validate and return ``k`` as a float64 kernel array.

    Raises ``ValueError`` if the kernel is not square with odd size, has a
    negative entry, or does not sum to one within ``tol``.
    """
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel must be square, got shape {k.shape}")
    if k.shape[0] % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k.shape[0]}")
    if not np.all(np.isfinite(k)):
        raise ValueError("kernel contains non-finite weights")
    if k.min() < 0:
        raise ValueError(f"kernel has negative weight {k.min():.3g}")
    if abs(k.sum() - 1.0) > tol:
        raise ValueError(f"kernel sums to {k.sum():.12g}, expected 1")
    return k


def center_crop(img: np.ndarray, multiple: int) -> np.ndarray:
    """Center-crop ``img`` so both spatial dims are divisible by ``multiple``."""
    h, w = img.shape[:2]
    nh, nw = h - h % multiple, w - w % multiple
    if nh == 0 or nw == 0:
        raise ValueError(f"image {h}x{w} is smaller than scale {multiple}")
    top, left = (h - nh) // 2, (w - nw) // 2
    return img[top:top + nh, left:left + nw]


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def load_image(path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB PNG/PGM/PPM file into [0, 1] floats."""
    path = os.fspath(path)
    try:
        pil = _PILImage.open(path)
        pil.load()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OSError(f"cannot read image {path!r}: {exc}") from exc
    if pil.mode not in ("L", "RGB"):
        raise ImageFormatError(
            f"{path!r}: unsupported mode {pil.mode!r}; need 8-bit L or RGB")
    data = np.asarray(pil, dtype=np.uint8)
    return data.astype(np.float64) / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize with round-half-up to 8-bit."""
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(img * 255.0 + 0.5).astype(np.uint8)


def save_image(img, path) -> None:
    """Write ``img`` as PNG (or PGM/PPM, chosen by file extension)."""
    img = as_image(img)
    path = os.fspath(path)
    mode = "L" if img.ndim == 2 else "RGB"
    ext = os.path.splitext(path)[1].lower()
    fmt = {".png": "PNG", ".pgm": "PPM", ".ppm": "PPM", ".pnm": "PPM"}.get(ext)
    if fmt is None:
        raise ImageFormatError(f"{path!r}: only .png, .pgm and .ppm are supported")
    if ext == ".pgm" and mode == "RGB":
        raise ImageFormatError(f"{path!r}: PGM cannot hold a colour image")
    _PILImage.fromarray(to_uint8(img), mode=mode).save(path, format=fmt)


# ---------------------------------------------------------------------------
# Colour and resampling
# ---------------------------------------------------------------------------

def rgb_to_y(img) -> np.ndarray:
    """Full-range BT.601 luma of an RGB image."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"rgb_to_y needs an (H, W, 3) image, got {img.shape}")
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def cubic_weight(t, a: float = -0.5):
    """Keys cubic convolution kernel evaluated at offsets ``t``."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2, t3 = t * t, t * t * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def _resize_matrix(n_in: int, n_out: int, a: float) -> np.ndarray:
    # Output sample j sits at input coordinate j * n_in / n_out, so the
    # top-left pixel of each block lines up with the s-fold decimation grid.
    pos = np.arange(n_out) * (n_in / n_out)
    base = np.floor(pos).astype(int)
    frac = pos - base
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for off in (-1, 0, 1, 2):
        idx = np.clip(base + off, 0, n_in - 1)
        np.add.at(mat, (rows, idx), cubic_weight(frac - off, a))
    return mat


def bicubic_resize(img, out_h: int, out_w: int, a: float = -0.5) -> np.ndarray:
    """Separable cubic-convolution resize with replicated edges.

    Output pixel ``(i, j)`` samples the input at ``(i * H / out_h,
    j * W / out_w)``; for an integer upscale this reproduces the input
    exactly on every ``s``-th pixel.
    """
    img = as_image(img)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    rmat = _resize_matrix(img.shape[0], out_h, a)
    cmat = _resize_matrix(img.shape[1], out_w, a)
    out = np.tensordot(rmat, img, axes=(1, 0))
    out = np.moveaxis(np.tensordot(cmat, out, axes=(1, 1)), 0, 1)
    return out


# ---------------------------------------------------------------------------
# Kernel text format
# ---------------------------------------------------------------------------

def write_kernel(k, path) -> None:
    """Write a kernel as ``p`` on the first line followed by ``p`` rows."""
    k = as_kernel(k)
    lines = [str(k.shape[0])]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in k]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_kernel(path) -> np.ndarray:
    """Read a kernel text file, renormalizing tiny deviations from the simplex."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise KernelFormatError(f"{path}: empty kernel file")
    try:
        p = int(lines[0].strip())
    except ValueError:
        raise KernelFormatError(f"{path}: bad header {lines[0]!r}") from None
    if p < 1 or p % 2 == 0:
        raise KernelFormatError(f"{path}: kernel size {p} must be odd and positive")
    body = lines[1:]
    if len(body) != p:
        raise KernelFormatError(f"{path}: expected {p} rows, found {len(body)}")
    try:
        rows = [[float(tok) for tok in ln.split()] for ln in body]
    except ValueError as exc:
        raise KernelFormatError(f"{path}: {exc}") from None
    if any(len(r) != p for r in rows):
        raise KernelFormatError(f"{path}: kernel body is not {p}x{p}")
    k = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(k)):
        raise KernelFormatError(f"{path}: non-finite weight")
    if k.min() < -KERNEL_READ_TOL:
        raise KernelFormatError(f"{path}: negative weight {k.min():.3g}")
    if abs(k.sum() - 1.0) > KERNEL_READ_TOL:
        raise KernelFormatError(f"{path}: weights sum to {k.sum():.9g}, expected 1")
    k = np.clip(k, 0.0, None)
    return k / k.sum()
