"""Blind single-image super-resolution by alternating proximal gradient.

Estimates a blur kernel and a high-resolution image from one low-resolution
observation under the model ``y = downsample(x * k, s) + noise``.
"""

from .imgcore import (as_image, as_kernel, load_image, save_image, rgb_to_y,
                      bicubic_resize, read_kernel, write_kernel, center_crop)
from .degrade import (Iso, Aniso, DegradationSpec, gaussian_kernel, convolve2d,
                      downsample, add_awgn, degrade, gaussian8, gaussian8_sigmas,
                      setting2_kernels, sample_setting2)
from .operators import (unfold, unfold_downsampled, unfold_matvec, unfold_rmatvec,
                        blur_downsample, conv_transpose_s, coverage, gradient_adjuster)
from .prox import (prox_simplex, IdentityProx, TikhonovProx, TVProx,
                   SimplexProjection, make_image_prox)
from .solver import (SolverConfig, SolverState, DivergenceError, run, init,
                     grad_k, grad_x, k_step, x_step, residual_lr,
                     backtracking_step)
from .metrics import psnr, ssim, kernel_l1, stage_loss, MetricReport, evaluate
from .harness import BenchmarkSpec, run_benchmark, calibrate_bicubic

__version__ = "0.1.0"
