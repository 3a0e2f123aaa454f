"""Linear operators of the blur-and-decimate model and their adjoints.

``A_k x = downsample(convolve2d(x, k), s)`` is linear in both ``x`` and
``k``. This module provides

* the patch-unfolding matrix ``U(x)`` with ``U(x) @ k.ravel() ==
  convolve2d(x, k).ravel()``, and its row-decimated version,
* matrix-free products with ``U(x)`` and its transpose,
* the exact adjoint of ``x -> A_k x`` (strided transposed convolution),
* the coverage-normalizing gradient adjuster.

All adjoints account for the boundary extension, so ``<A x, e> == <x, A^T e>``
holds to rounding error for every boundary mode, not only the circular one.
"""

from __future__ import annotations

import numpy as np

from .degrade import pad, convolve2d, downsample, BOUNDARIES

__all__ = [
    "MAX_UNFOLD_PATCH",
    "MAX_UNFOLD_PIXELS",
    "pad_adjoint",
    "unfold",
    "unfold_downsampled",
    "unfold_matvec",
    "unfold_rmatvec",
    "blur_downsample",
    "conv_transpose_s",
    "coverage",
    "gradient_adjuster",
]

MAX_UNFOLD_PATCH = 441
MAX_UNFOLD_PIXELS = 512 * 512
ADJUSTER_FLOOR = 1e-8


def _source_index(n: int, c: int, boundary: str) -> np.ndarray:
    idx = np.arange(-c, n + c)
    if boundary == "circular":
        return idx % n
    if boundary == "replicate":
        return np.clip(idx, 0, n - 1)
    raise ValueError(f"unknown boundary {boundary!r}")


def pad_adjoint(z: np.ndarray, c: int, boundary: str) -> np.ndarray:
    """Adjoint of :func:`blindsr.degrade.pad`: fold the margin back in."""
    h, w = z.shape[0] - 2 * c, z.shape[1] - 2 * c
    if boundary == "zero":
        return z[c:c + h, c:c + w].copy()
    if boundary not in BOUNDARIES:
        raise ValueError(f"unknown boundary {boundary!r}")
    rows = np.zeros((h,) + z.shape[1:])
    np.add.at(rows, _source_index(h, c, boundary), z)
    out = np.zeros((h, w) + z.shape[2:])
    np.add.at(out, (slice(None), _source_index(w, c, boundary)), rows)
    return out


def _check_patch(p: int):
    if p < 1 or p % 2 == 0:
        raise ValueError(f"patch size must be odd, got {p}")


def _check_divisible(x, s):
    if s < 1 or x.shape[0] % s or x.shape[1] % s:
        raise ValueError(f"image dims {x.shape[:2]} are not divisible by {s}")


def _patch_views(x, p, s, boundary):
    # View (a, b) holds x_pad[2c - a + s*i, 2c - b + s*j]: the sample that
    # kernel tap (a, b) multiplies when producing output pixel (s*i, s*j).
    c = p // 2
    xp = pad(np.asarray(x, dtype=np.float64), c, boundary)
    h, w = x.shape[:2]
    for a in range(p):
        for b in range(p):
            yield a, b, xp[2 * c - a:2 * c - a + h:s, 2 * c - b:2 * c - b + w:s]


def unfold_downsampled(x, p: int, s: int = 1, boundary: str = "replicate") -> np.ndarray:
    """Materialize ``D_s U(x)``: one row per surviving pixel, ``p*p`` columns.

    Row order is raster order of the decimated grid (channels fastest);
    column ``a*p + b`` pairs with ``k[a, b]``.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_patch(p)
    _check_divisible(x, s)
    if p * p > MAX_UNFOLD_PATCH or x.shape[0] * x.shape[1] > MAX_UNFOLD_PIXELS:
        raise ValueError(
            "unfold is limited to p*p <= 441 and H*W <= 512**2; "
            "use unfold_matvec / unfold_rmatvec instead")
    cols = [v.ravel() for _, _, v in _patch_views(x, p, s, boundary)]
    return np.stack(cols, axis=1)


def unfold(x, p: int, boundary: str = "replicate") -> np.ndarray:
    """Materialize ``U(x)``, the ``(H*W) x p^2`` patch matrix."""
    return unfold_downsampled(x, p, 1, boundary)


def unfold_matvec(x, k, s: int = 1, boundary: str = "replicate") -> np.ndarray:
    """``D_s U(x) @ vec(k)`` reshaped to the decimated image, without materializing."""
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    _check_divisible(x, s)
    out = 0.0
    for a, b, v in _patch_views(x, k.shape[0], s, boundary):
        out = out + k[a, b] * v
    return out


def unfold_rmatvec(x, r, p: int, s: int = 1, boundary: str = "replicate") -> np.ndarray:
    """``(D_s U(x))^T @ vec(r)`` as a ``p x p`` array, without materializing."""
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    _check_patch(p)
    _check_divisible(x, s)
    if r.shape != (x.shape[0] // s, x.shape[1] // s) + x.shape[2:]:
        raise ValueError(f"residual shape {r.shape} does not match image {x.shape} at scale {s}")
    g = np.empty((p, p))
    for a, b, v in _patch_views(x, p, s, boundary):
        g[a, b] = np.vdot(v, r)
    return g


def blur_downsample(x, k, s: int, boundary: str = "replicate") -> np.ndarray:
    """Noise-free forward model ``downsample(convolve2d(x, k), s)``."""
    return downsample(convolve2d(x, k, boundary), s)


def conv_transpose_s(k, e, s: int, out_h: int, out_w: int,
                     boundary: str = "replicate") -> np.ndarray:
    """Adjoint of ``x -> downsample(convolve2d(x, k), s)``.

    Zero-insertion upsampling of ``e`` by ``s`` followed by correlation with
    ``k``; samples that the boundary extension duplicated are folded back
    onto their source pixels.
    """
    k = np.asarray(k, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if out_h % s or out_w % s or e.shape[:2] != (out_h // s, out_w // s):
        raise ValueError(
            f"residual shape {e.shape[:2]} does not match {out_h}x{out_w} at scale {s}")
    p = k.shape[0]
    c = p // 2
    up = np.zeros((out_h, out_w) + e.shape[2:])
    up[::s, ::s] = e
    acc = np.zeros((out_h + 2 * c, out_w + 2 * c) + e.shape[2:])
    for a in range(p):
        for b in range(p):
            if k[a, b] != 0.0:
                acc[2 * c - a:2 * c - a + out_h, 2 * c - b:2 * c - b + out_w] += k[a, b] * up
    return pad_adjoint(acc, c, boundary)


def coverage(k, s: int, out_h: int, out_w: int, boundary: str = "replicate") -> np.ndarray:
    """``conv_transpose_s(k, 1)``: how much kernel mass lands on each HR pixel."""
    ones = np.ones((out_h // s, out_w // s))
    return conv_transpose_s(k, ones, s, out_h, out_w, boundary)


def gradient_adjuster(g, k, s: int, out_h: int, out_w: int,
                      boundary: str = "replicate", floor: float = ADJUSTER_FLOOR) -> np.ndarray:
    """Divide an HR gradient by the kernel coverage map, floored at ``floor``."""
    g = np.asarray(g, dtype=np.float64)
    div = np.maximum(coverage(k, s, out_h, out_w, boundary), floor)
    if g.ndim == 3:
        div = div[:, :, None]
    return g / div
