# %% [markdown]
# # Alternating kernel / image estimation
#
# Each stage takes a projected gradient step on the kernel (kept on the
# probability simplex), then a coverage-adjusted gradient step on the image
# followed by an image prox.  Step sizes come from backtracking.

# %%
import numpy as np

from blindsr import DegradationSpec, Iso, SolverConfig, TikhonovProx, degrade, psnr, run
from blindsr.imgcore import bicubic_resize
from blindsr.charts import shapes

hr = shapes(64, seed=0)
lr, k_true = degrade(hr, DegradationSpec(scale=2, kernel_size=11, params=Iso(1.2)))

cfg = SolverConfig(stages=50, scale=2, kernel_size=11, image_prox=TikhonovProx(1e-4))
state = run(lr, cfg, ground_truth=(hr, k_true))

for row in state.trace[::10]:
    print(f"stage {row['stage']:2d}  fidelity {row['fidelity']:.3e}  "
          f"psnr {row['psnr']:.2f}  kernel L1 {row['kernel_l1']:.3f}")

print("bicubic baseline PSNR:", round(psnr(bicubic_resize(lr, 64, 64), hr, border=2), 2))
print("estimated kernel sums to", state.k.sum(), "min", state.k.min())

# %% [markdown]
# With the true kernel held fixed the image sub-problem is convex, and the
# data term never increases from one stage to the next.

# %%
fixed = run(lr, SolverConfig(stages=30, scale=2, kernel_size=11, update_kernel=False), k0=k_true)
f = [r["fidelity"] for r in fixed.trace]
print("monotone:", all(b <= a for a, b in zip(f, f[1:])), "  first/last:", f[0], f[-1])
