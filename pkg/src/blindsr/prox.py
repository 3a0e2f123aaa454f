"""Proximal operators used by the kernel and image updates.

Every operator is a callable ``prox(v, step)`` returning
``argmin_u 0.5 * ||u - v||^2 + step * g(u)`` for its regularizer ``g``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "prox_simplex",
    "Prox",
    "SimplexProjection",
    "IdentityProx",
    "TikhonovProx",
    "TVProx",
    "tv_denoise",
    "make_image_prox",
]


def prox_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{u : u >= 0, sum(u) == 1}``.

    Sort-and-threshold algorithm; works on arrays of any shape, which are
    treated as flat vectors.
    """
    v = np.asarray(v, dtype=np.float64)
    flat = v.ravel()
    u = np.sort(flat)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, flat.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    out = np.maximum(flat - theta, 0.0)
    # theta comes from a difference of large sums when |v| is large; one
    # correction pass on the (small) output restores sum == 1 to rounding.
    support = out > 0
    out[support] -= (out.sum() - 1.0) / support.sum()
    return np.maximum(out, 0.0).reshape(v.shape)


class Prox:
    """Base class; subclasses implement ``__call__(v, step)``."""

    name = "prox"

    def __call__(self, v, step: float):
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class SimplexProjection(Prox):
    """Indicator of the probability simplex; ``step`` is irrelevant."""

    name = "simplex"

    def __call__(self, v, step: float = 1.0):
        return prox_simplex(v)


class IdentityProx(Prox):
    name = "identity"

    def __call__(self, v, step: float = 1.0):
        return np.asarray(v, dtype=np.float64)


class TikhonovProx(Prox):
    """Ridge penalty ``tau/2 * ||u||^2``: uniform shrinkage by ``1 + tau*step``."""

    name = "tikhonov"

    def __init__(self, tau: float = 1e-4):
        if tau < 0:
            raise ValueError(f"tau must be >= 0, got {tau}")
        self.tau = float(tau)

    def __call__(self, v, step: float = 1.0):
        return np.asarray(v, dtype=np.float64) / (1.0 + self.tau * step)

    def params(self):
        return {"tau": self.tau}


def _grad(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:-1] = u[1:] - u[:-1]
    gy[:, :-1] = u[:, 1:] - u[:, :-1]
    return gx, gy


def _div(px, py):
    # Negative adjoint of _grad (Neumann boundary).
    d = np.zeros_like(px)
    d[:-1] += px[:-1]
    d[1:] -= px[:-1]
    d[:, :-1] += py[:, :-1]
    d[:, 1:] -= py[:, :-1]
    return d


def tv_denoise(v, weight: float, n_iter: int = 50, tol: float = 0.0) -> np.ndarray:
    """Isotropic ROF denoising by Chambolle's dual projection algorithm.

    Solves ``min_u 0.5 * ||u - v||^2 + weight * TV(u)`` for a 2-D array,
    or channel by channel for ``(H, W, C)`` input.
    """
    v = np.asarray(v, dtype=np.float64)
    if weight <= 0:
        return v.copy()
    if v.ndim == 3:
        return np.stack([tv_denoise(v[..., i], weight, n_iter, tol)
                         for i in range(v.shape[2])], axis=-1)
    tau = 0.125
    px = np.zeros_like(v)
    py = np.zeros_like(v)
    u = v
    for _ in range(n_iter):
        gx, gy = _grad(_div(px, py) - v / weight)
        norm = 1.0 + tau * np.sqrt(gx * gx + gy * gy)
        px = (px + tau * gx) / norm
        py = (py + tau * gy) / norm
        u_new = v - weight * _div(px, py)
        if tol and np.max(np.abs(u_new - u)) < tol:
            u = u_new
            break
        u = u_new
    return u


class TVProx(Prox):
    """Total-variation penalty ``tau * TV(u)`` solved with ``inner_iters`` dual steps."""

    name = "tv"

    def __init__(self, tau: float = 1e-3, inner_iters: int = 50):
        if tau < 0:
            raise ValueError(f"tau must be >= 0, got {tau}")
        self.tau = float(tau)
        self.inner_iters = int(inner_iters)

    def __call__(self, v, step: float = 1.0):
        return tv_denoise(v, self.tau * step, self.inner_iters)

    def params(self):
        return {"tau": self.tau, "inner_iters": self.inner_iters}


def make_image_prox(name: str, tau: float = 0.0, inner_iters: int = 50) -> Prox:
    """Build an image prox from its config name."""
    if name == "identity":
        return IdentityProx()
    if name == "tikhonov":
        return TikhonovProx(tau)
    if name == "tv":
        return TVProx(tau, inner_iters)
    raise ValueError(f"unknown image prox {name!r}; choose identity, tikhonov or tv")
