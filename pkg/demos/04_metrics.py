# %% [markdown]
# # Scoring reconstructions
#
# PSNR and SSIM are computed on the luma channel, after shaving a border of
# s pixels by default.  Kernel error is the plain L1 distance.

# %%
import numpy as np

from blindsr import evaluate, kernel_l1, psnr, ssim, stage_loss
from blindsr.charts import zone_plate

rng = np.random.default_rng(1)
gt = zone_plate(64)
for sigma in (0.01, 0.03, 0.1):
    noisy = np.clip(gt + sigma * rng.standard_normal(gt.shape), 0, 1)
    print(f"noise {sigma:.2f}: PSNR {psnr(noisy, gt, border=2):6.2f} dB  "
          f"SSIM {ssim(noisy, gt, border=2):.4f}")

print("identical images:", psnr(gt, gt), ssim(gt, gt))
print("uniform vs delta kernel L1:", kernel_l1(np.full((3, 3), 1 / 9), np.pad([[1.0]], 1)))

# %% [markdown]
# The stage-weighted loss sums kernel and image L1 errors over stages, with
# weight 0.1 on intermediate stages and 1.0 on the last.

# %%
k = np.full((3, 3), 1 / 9)
trace = [(np.pad([[1.0]], 1), gt + 0.01), (k, gt)]
print("stage loss:", stage_loss(trace, (k, gt)))
print(evaluate(gt, gt, border=2).to_csv())
