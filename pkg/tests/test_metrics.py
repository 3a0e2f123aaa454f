import csv
import io
import json
import math

import numpy as np
import pytest

from blindsr.metrics import (MetricReport, default_stage_weights, evaluate, kernel_l1, psnr, ssim,
                             stage_loss)

skimage_metrics = pytest.importorskip("skimage.metrics")


def test_psnr_examples():
    a = np.zeros((8, 8))
    assert psnr(a, a) == math.inf
    assert psnr(a, np.ones((8, 8))) == 0.0
    assert psnr(a, np.full((8, 8), 0.5)) == pytest.approx(6.0206, abs=5e-5)
    assert psnr(a, np.full((8, 8), 0.5)) == pytest.approx(10 * math.log10(4), abs=1e-12)


def test_psnr_symmetric_and_border(rng):
    a, b = rng.random((12, 12)), rng.random((12, 12))
    assert psnr(a, b) == psnr(b, a)
    inner = np.mean((a[2:-2, 2:-2] - b[2:-2, 2:-2]) ** 2)
    assert psnr(a, b, border=2) == pytest.approx(10 * math.log10(1 / inner), rel=1e-13)


def test_psnr_decreases_with_noise(rng):
    a = rng.random((32, 32))
    noise = rng.standard_normal((32, 32))
    values = [psnr(a, a + s * noise) for s in (0.01, 0.02, 0.05, 0.1, 0.3)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_psnr_uses_luma_for_colour(rng):
    a, b = rng.random((10, 10, 3)), rng.random((10, 10, 3))
    w = np.array([0.299, 0.587, 0.114])
    mse = np.mean((a @ w - b @ w) ** 2)
    assert psnr(a, b) == pytest.approx(10 * math.log10(1 / mse), rel=1e-12)


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_ssim_identical_is_one(rng):
    a = rng.random((20, 20))
    assert ssim(a, a) == 1.0


@pytest.mark.parametrize("c1, c2", [(0.2, 0.7), (0.5, 0.5), (0.0, 1.0)])
def test_ssim_constant_closed_form(c1, c2):
    C1, C2 = 0.01 ** 2, 0.03 ** 2
    expected = (2 * c1 * c2 + C1) * C2 / ((c1 ** 2 + c2 ** 2 + C1) * C2)
    assert ssim(np.full((16, 16), c1), np.full((16, 16), c2)) == pytest.approx(expected, abs=1e-12)


def test_ssim_symmetric_and_bounded(rng):
    for _ in range(5):
        a, b = rng.random((24, 24)), rng.random((24, 24))
        assert abs(ssim(a, b) - ssim(b, a)) <= 1e-12
        assert -1 <= ssim(a, b) <= 1


@pytest.mark.parametrize("border", [0, 3])
def test_ssim_matches_skimage(rng, border):
    a = rng.random((40, 36))
    b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
    sl = (slice(border, a.shape[0] - border), slice(border, a.shape[1] - border)) if border else ...
    ref_map = skimage_metrics.structural_similarity(
        a[sl], b[sl], gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
        data_range=1.0, full=True)[1]
    # skimage averages over the whole image (reflect padding); compare on the valid interior.
    ref = ref_map[5:-5, 5:-5].mean()
    assert ssim(a, b, border=border) == pytest.approx(ref, abs=1e-6)


def test_ssim_too_small():
    with pytest.raises(ValueError):
        ssim(np.zeros((10, 10)), np.ones((10, 10)))


def test_kernel_l1_examples():
    k = np.full((3, 3), 1 / 9)
    d1 = np.zeros((3, 3))
    d1[1, 1] = 1
    d2 = np.zeros((3, 3))
    d2[0, 0] = 1
    assert kernel_l1(k, k) == 0
    assert kernel_l1(d1, d2) == 2
    assert kernel_l1(k, d1) == pytest.approx(16 / 9, abs=1e-15)
    with pytest.raises(ValueError):
        kernel_l1(k, np.ones((5, 5)) / 25)


def test_stage_weights():
    np.testing.assert_array_equal(default_stage_weights(3), [0.1, 0.1, 1.0])
    assert len(default_stage_weights(19)) == 19


def test_stage_loss_examples(rng):
    k = np.full((3, 3), 1 / 9)
    x = rng.random((6, 6))
    assert stage_loss([(k, x)] * 4, (k, x)) == 0.0

    k1 = np.zeros((3, 3))
    k1[1, 1] = 1
    x1 = x + 0.5
    assert stage_loss([(k1, x1)], (k, x), [1.0], [1.0]) == pytest.approx(16 / 9 + 18.0)

    x2 = x.copy()
    x2[0, 0] += 2.0
    # Stage errors: e_K1 = 16/9, e_X1 = 18; e_K2 = 0, e_X2 = 2.
    loss = stage_loss([(k1, x1), (k, x2)], (k, x))
    assert loss == pytest.approx(0.1 * (16 / 9 + 18) + 1.0 * (0 + 2), rel=1e-14)


def test_stage_loss_linear_in_weights(rng):
    k = np.full((3, 3), 1 / 9)
    x = rng.random((4, 4))
    trace = [(np.roll(np.eye(3) / 3, t, axis=0), x + 0.1 * t) for t in range(3)]
    a1, a2 = rng.random(3), rng.random(3)
    b = rng.random(3)
    lhs = stage_loss(trace, (k, x), 2 * a1 + 3 * a2, b)
    rhs = 2 * stage_loss(trace, (k, x), a1, 0 * b) + 3 * stage_loss(trace, (k, x), a2, 0 * b) \
        + stage_loss(trace, (k, x), 0 * a1, b)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_stage_loss_length_mismatch(rng):
    k = np.full((3, 3), 1 / 9)
    x = rng.random((4, 4))
    with pytest.raises(ValueError):
        stage_loss([(k, x)] * 2, (k, x), [1.0], [1.0, 1.0])


def test_report_serialization(rng):
    a = rng.random((16, 16))
    rep = evaluate(a, a, border=2)
    assert rep.psnr_db == math.inf and rep.ssim == 1.0 and rep.kernel_l1 is None
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert rows[0]["psnr_db"] == "inf"
    assert rows[0]["ssim"] == "1.0"
    assert rows[0]["kernel_l1"] == ""
    assert rows[0]["border"] == "2"
    d = json.loads(rep.to_json())
    assert d["psnr_db"] == "inf" and d["ssim"] == 1.0 and d["kernel_l1"] is None

    k = np.full((3, 3), 1 / 9)
    rep2 = evaluate(a, np.clip(a + 0.1, 0, 1), k_est=k, k_gt=k)
    assert rep2.kernel_l1 == 0.0
    assert json.loads(rep2.to_json())["psnr_db"] == pytest.approx(rep2.psnr_db)
    assert isinstance(rep2, MetricReport)
