# %% [markdown]
# # Convolution as a matrix, and its transpose
#
# Unfolding an image into its p x p patches turns convolution into a plain
# matrix-vector product.  This is what makes the kernel gradient a single
# transposed product, and the image gradient a stride-s transposed
# convolution.

# %%
import numpy as np

from blindsr import (blur_downsample, conv_transpose_s, convolve2d, gradient_adjuster, unfold,
                     unfold_downsampled, unfold_matvec)

rng = np.random.default_rng(0)
x = rng.random((12, 12))
k = rng.random((5, 5))
k /= k.sum()

U = unfold(x, 5, boundary="circular")
print("unfolded matrix", U.shape)
err = np.abs(U @ k.ravel() - convolve2d(x, k, "circular").ravel()).max()
print("U vec(k) vs convolution, max error:", err)

# %% [markdown]
# Keeping only the rows of pixels that survive decimation gives the forward
# operator of the kernel sub-problem.  A matrix-free version of the same
# product is used on large images.

# %%
D = unfold_downsampled(x, 5, 2, "circular")
print("decimated unfold", D.shape)
print("matches blur+decimate:",
      np.abs(D @ k.ravel() - blur_downsample(x, k, 2, "circular").ravel()).max())
print("matrix-free agrees:", np.abs(unfold_matvec(x, k, 2, "circular").ravel() - D @ k.ravel()).max())

# %% [markdown]
# The transposed convolution is the exact adjoint of blur+decimate, for
# every boundary rule.

# %%
e = rng.standard_normal((6, 6))
for boundary in ("replicate", "circular", "zero"):
    lhs = np.vdot(blur_downsample(x, k, 2, boundary), e)
    rhs = np.vdot(x, conv_transpose_s(k, e, 2, 12, 12, boundary))
    print(f"{boundary:9s} <Ax,e> - <x,A^T e> = {lhs - rhs:+.1e}")

# %% [markdown]
# The gradient adjuster divides by how much kernel mass each HR pixel
# receives, which evens out the step across the s-grid.

# %%
g = conv_transpose_s(k, e, 2, 12, 12)
print("coverage-normalized gradient, first row:", np.round(gradient_adjuster(g, k, 2, 12, 12)[0], 3))
