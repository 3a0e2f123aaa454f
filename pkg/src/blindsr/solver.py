"""Alternating proximal-gradient solver for blind super-resolution.

Each stage updates the kernel by a projected gradient step on the simplex,
then the HR image by a coverage-adjusted gradient step followed by the image
prox. The data term is ``f(x, k) = 0.5 * ||downsample(x * k, s) - y||^2``;
residuals are taken as ``model - observation`` so that every step descends.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .degrade import Iso, gaussian_kernel, BOUNDARIES
from .imgcore import as_image, bicubic_resize
from .operators import (blur_downsample, conv_transpose_s, gradient_adjuster,
                        unfold_rmatvec)
from .prox import IdentityProx, Prox, prox_simplex

__all__ = [
    "DivergenceError",
    "SolverConfig",
    "SolverState",
    "init",
    "fidelity",
    "residual_lr",
    "grad_k",
    "grad_x",
    "backtracking_step",
    "k_step",
    "x_step",
    "run",
]

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """Raised when the iterates stop being finite or no step size is admissible.

    ``stage`` is the failing stage index and ``state`` the last finite state
    (may be ``None`` when raised outside :func:`run`).
    """

    def __init__(self, message, stage=None, state=None):
        super().__init__(message)
        self.stage = stage
        self.state = state


@dataclass
class SolverConfig:
    """Solver settings.

    ``delta_k`` / ``delta_x`` set fixed step sizes; ``None`` selects
    backtracking started from twice the previously accepted step.
    """

    stages: int = 19
    scale: int = 2
    kernel_size: int = 21
    delta_k: Optional[float] = None
    delta_x: Optional[float] = None
    image_prox: Prox = field(default_factory=IdentityProx)
    boundary: str = "replicate"
    init_sigma: Optional[float] = None
    use_adjuster: bool = True
    update_kernel: bool = True
    armijo: float = 1e-4
    max_halvings: int = 40
    step_init: float = 1.0
    keep_history: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.stages < 0:
            raise ValueError(f"stages must be >= 0, got {self.stages}")
        for name in ("delta_k", "delta_x"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be >= 0, got {val}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")


@dataclass
class SolverState:
    x: np.ndarray
    k: np.ndarray
    t: int = 0
    fidelity: float = float("nan")
    trace: list = field(default_factory=list)
    history: list = field(default_factory=list)
    step_k: float = 1.0
    step_x: float = 1.0


def _check_dims(y, x, s):
    if x.shape[0] != s * y.shape[0] or x.shape[1] != s * y.shape[1] or x.shape[2:] != y.shape[2:]:
        raise ValueError(f"HR shape {x.shape} does not match LR shape {y.shape} at scale {s}")


def init(y, cfg: SolverConfig) -> SolverState:
    """Bicubic upsampling of ``y`` and a centred isotropic Gaussian kernel."""
    y = as_image(y)
    s, p = cfg.scale, cfg.kernel_size
    x0 = bicubic_resize(y, s * y.shape[0], s * y.shape[1])
    sigma0 = cfg.init_sigma if cfg.init_sigma is not None else p / 6.0
    k0 = gaussian_kernel(p, Iso(sigma0))
    return SolverState(x=x0, k=k0, t=0, step_k=cfg.step_init, step_x=cfg.step_init)


def residual_lr(y, x, k, s: int, boundary: str = "replicate") -> np.ndarray:
    """Observation minus model: ``y - downsample(x * k, s)``."""
    y = np.asarray(y, dtype=np.float64)
    _check_dims(y, x, s)
    return y - blur_downsample(x, k, s, boundary)


def fidelity(y, x, k, s: int, boundary: str = "replicate") -> float:
    """``0.5 * ||y - downsample(x * k, s)||^2``."""
    r = residual_lr(y, x, k, s, boundary)
    return 0.5 * float(np.vdot(r, r))


def grad_k(y, x, k, s: int, boundary: str = "replicate") -> np.ndarray:
    """Gradient of :func:`fidelity` with respect to the kernel (``p x p``)."""
    r = -residual_lr(y, x, k, s, boundary)
    return unfold_rmatvec(x, r, np.shape(k)[0], s, boundary)


def grad_x(y, x, k, s: int, boundary: str = "replicate") -> np.ndarray:
    """Gradient of :func:`fidelity` with respect to the HR image."""
    r = -residual_lr(y, x, k, s, boundary)
    return conv_transpose_s(k, r, s, x.shape[0], x.shape[1], boundary)


def backtracking_step(f: Callable, v, g, delta_init: float, *,
                      direction=None, prox: Optional[Callable] = None,
                      c: float = 1e-4, max_halvings: int = 40) -> float:
    """Largest ``delta_init * 2**-m`` (``m <= max_halvings``) passing a sufficient-decrease test.

    Without ``prox`` this is the Armijo rule along ``d = direction`` (default
    ``g``)::

        f(v - delta*d) <= f(v) - c * delta * <g, d>

    With ``prox`` the candidate is ``u = prox(v - delta*d, delta)`` and the
    test is the proximal-gradient majorization::

        f(u) <= f(v) + <g, u - v> + ||u - v||^2 / (2*delta)

    Raises :class:`DivergenceError` if no halving is admissible.
    """
    v = np.asarray(v, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise DivergenceError("gradient is not finite")
    d = g if direction is None else np.asarray(direction, dtype=np.float64)
    f0 = f(v)
    slope = float(np.vdot(g, d))
    delta = float(delta_init)
    for _ in range(max_halvings + 1):
        if prox is None:
            fv = f(v - delta * d)
            if fv <= f0 - c * delta * slope:
                return delta
        else:
            u = prox(v - delta * d, delta)
            diff = u - v
            fv = f(u)
            bound = f0 + float(np.vdot(g, diff)) + float(np.vdot(diff, diff)) / (2 * delta)
            if fv <= bound:
                return delta
        delta *= 0.5
    raise DivergenceError(
        f"no admissible step in {max_halvings} halvings from {delta_init:g}")


def k_step(state: SolverState, y, cfg: SolverConfig) -> np.ndarray:
    """Projected gradient step on the kernel; returns the new kernel.

    With backtracking the accepted step is stored back in ``state.step_k``.
    """
    s, bnd = cfg.scale, cfg.boundary
    g = grad_k(y, state.x, state.k, s, bnd)
    if cfg.delta_k is not None:
        delta = cfg.delta_k
    else:
        delta = backtracking_step(
            lambda kk: fidelity(y, state.x, kk, s, bnd), state.k, g,
            2.0 * state.step_k, prox=lambda v, _: prox_simplex(v),
            c=cfg.armijo, max_halvings=cfg.max_halvings)
        state.step_k = delta
    return prox_simplex(state.k - delta * g)


def x_step(state: SolverState, y, cfg: SolverConfig, k=None) -> np.ndarray:
    """Adjusted gradient step on the image followed by the image prox.

    ``k`` defaults to ``state.k``. With backtracking the step is chosen by
    Armijo on the data term along the adjusted direction, then the prox is
    applied with that step, and the step is stored in ``state.step_x``.
    """
    s, bnd = cfg.scale, cfg.boundary
    k = state.k if k is None else k
    x = state.x
    g = grad_x(y, x, k, s, bnd)
    d = gradient_adjuster(g, k, s, x.shape[0], x.shape[1], bnd) if cfg.use_adjuster else g
    if cfg.delta_x is not None:
        delta = cfg.delta_x
    else:
        delta = backtracking_step(
            lambda xx: fidelity(y, xx, k, s, bnd), x, g, 2.0 * state.step_x,
            direction=d, c=cfg.armijo, max_halvings=cfg.max_halvings)
        state.step_x = delta
    return cfg.image_prox(x - delta * d, delta)


def _diagnostics(x, k, ground_truth, border):
    from .metrics import kernel_l1, psnr
    gx, gk = ground_truth
    row = {}
    if gx is not None:
        row["psnr"] = psnr(x, gx, border=border)
    if gk is not None:
        row["kernel_l1"] = kernel_l1(k, gk)
    return row


def run(y, cfg: SolverConfig, ground_truth=None, x0=None, k0=None,
        callback: Optional[Callable] = None) -> SolverState:
    """Initialize and run ``cfg.stages`` stages of (kernel step, image step).

    ``ground_truth`` is an optional ``(x, k)`` pair (either may be ``None``)
    used only for per-stage diagnostics. ``x0`` / ``k0`` override the default
    initialization. ``callback(state)`` is called after every stage.

    Trace rows hold ``stage``, ``fidelity`` (after the image step),
    ``fidelity_k`` (after the kernel step), ``kernel_change`` (Frobenius norm
    of the kernel update) and, with ground truth, ``psnr`` and ``kernel_l1``.
    """
    y = as_image(y)
    s = cfg.scale
    state = init(y, cfg)
    if x0 is not None:
        state.x = as_image(x0)
    if k0 is not None:
        state.k = np.asarray(k0, dtype=np.float64)
    _check_dims(y, state.x, s)
    if state.k.shape != (cfg.kernel_size, cfg.kernel_size):
        raise ValueError(f"initial kernel shape {state.k.shape} != kernel_size {cfg.kernel_size}")
    border = s

    state.fidelity = fidelity(y, state.x, state.k, s, cfg.boundary)
    row = {"stage": 0, "fidelity": state.fidelity, "fidelity_k": state.fidelity,
           "kernel_change": 0.0}
    if ground_truth is not None:
        row.update(_diagnostics(state.x, state.k, ground_truth, border))
    state.trace.append(row)

    for t in range(1, cfg.stages + 1):
        # Arrays are never mutated in place, so a shallow snapshot suffices.
        last = copy.copy(state)
        last.trace, last.history = list(state.trace), list(state.history)
        try:
            k_new = k_step(state, y, cfg) if cfg.update_kernel else state.k
            f_k = fidelity(y, state.x, k_new, s, cfg.boundary)
            x_new = x_step(state, y, cfg, k=k_new)
            f_x = fidelity(y, x_new, k_new, s, cfg.boundary)
        except DivergenceError as exc:
            raise DivergenceError(f"stage {t}: {exc}", stage=t, state=last) from None
        if not (np.all(np.isfinite(k_new)) and np.all(np.isfinite(x_new)) and np.isfinite(f_x)):
            raise DivergenceError(f"stage {t}: iterate became non-finite", stage=t, state=last)
        change = float(np.linalg.norm(k_new - state.k))
        state.k, state.x, state.t, state.fidelity = k_new, x_new, t, f_x
        row = {"stage": t, "fidelity": f_x, "fidelity_k": f_k, "kernel_change": change}
        if ground_truth is not None:
            row.update(_diagnostics(x_new, k_new, ground_truth, border))
        state.trace.append(row)
        if cfg.keep_history:
            state.history.append((k_new.copy(), x_new.copy()))
        log.debug("stage %d: f=%.6g dk=%.3g step_k=%.3g step_x=%.3g",
                  t, f_x, change, state.step_k, state.step_x)
        if callback is not None:
            callback(state)
    return state
