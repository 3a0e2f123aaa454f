# %% [markdown]
# # Synthesizing low-resolution observations
#
# The forward model blurs a sharp image with a Gaussian kernel, keeps the
# upper-left pixel of every s x s block, and adds white noise whose level is
# quoted on the 0-255 scale.

# %%
import numpy as np

from blindsr import (Aniso, DegradationSpec, Iso, degrade, gaussian8, gaussian8_sigmas,
                     gaussian_kernel, setting2_kernels)
from blindsr.charts import shapes

hr = shapes(64, seed=0)
print("HR image", hr.shape, "range", hr.min(), hr.max())

# %% [markdown]
# An isotropic kernel is described by one width; an anisotropic one by two
# axis widths and a rotation.

# %%
k_iso = gaussian_kernel(11, Iso(1.2))
k_aniso = gaussian_kernel(11, Aniso(0.8, 1.6, np.pi / 4))
print("iso kernel sum", k_iso.sum(), "centre weight", round(k_iso[5, 5], 4))
print("45-degree kernel is symmetric about the main diagonal:",
      np.allclose(k_aniso, k_aniso.T))

# %%
spec = DegradationSpec(scale=2, kernel_size=11, params=Iso(1.2), noise=5, seed=3)
lr, k = degrade(hr, spec)
print("LR image", lr.shape)
print("same spec, same output:", np.array_equal(lr, degrade(hr, spec)[0]))
print("spec as a dict:", spec.to_dict())

# %% [markdown]
# The two test-kernel families: eight evenly spaced isotropic widths per
# scale, and a grid of 2 width pairs x 4 rotations.

# %%
for s in (2, 3, 4):
    print(f"x{s} widths:", np.round(gaussian8_sigmas(s), 4))
print("x2 isotropic set:", len(gaussian8(2)), "kernels of shape", gaussian8(2)[0].shape)
for params, kern in setting2_kernels(2)[:4]:
    print(params, kern.shape)
